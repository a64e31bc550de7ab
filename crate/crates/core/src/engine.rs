//! Finite-population stochastic processes and polarization estimation.
//!
//! A configuration is an ordered list of opinions; agent identity is the
//! index. Two schedulers drive the dynamics: `UniformPair` picks one pair
//! uniformly at random per step, `RandomMatching` draws a uniform perfect
//! matching per round and updates every pair simultaneously (which is why
//! it requires an even population).
//!
//! A run stops at the first entry into the ε-neighborhood of a trivialized
//! configuration. That neighborhood is absorbing for
//! `ε < min(τ/2, (1-τ)/2)`, so the classification cannot flip afterwards
//! and first entry is a sound stopping rule.

use crate::kernel::{InteractionRule, ModelParams, Opinion};
use crate::seeding::derive_seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default interaction budget for the one-pair-per-step scheduler.
pub const DEFAULT_MAX_STEPS_UNIFORM: u64 = 1_000_000;
/// Default round budget for the random-matching scheduler.
pub const DEFAULT_MAX_ROUNDS_MATCHING: u64 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("population must have at least 2 agents, got {0}")]
    PopulationTooSmall(usize),
    #[error("opinion value {0} lies outside [0,1]")]
    ValueOutOfRange(f64),
    #[error("random matching requires an even population, got {0}")]
    OddPopulation(usize),
    #[error("epsilon {0} must lie in (0, 1/2)")]
    InvalidEpsilon(f64),
    #[error("empirical distribution needs at least one sample")]
    EmptySampleList,
    #[error("runs must be >= 1")]
    NoRuns,
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("grid value tau = {0} outside (0,1)")]
    InvalidTau(f64),
}

/// The state `Φ = (φ^1, ..., φ^n)`, opinions indexed by agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration {
    opinions: Vec<Opinion>,
}

impl Configuration {
    pub fn new(values: Vec<f64>) -> Result<Self, EngineError> {
        if values.len() < 2 {
            return Err(EngineError::PopulationTooSmall(values.len()));
        }
        let opinions = values
            .into_iter()
            .map(|v| Opinion::new(v).map_err(|_| EngineError::ValueOutOfRange(v)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Configuration { opinions })
    }

    pub fn from_opinions(opinions: Vec<Opinion>) -> Result<Self, EngineError> {
        if opinions.len() < 2 {
            return Err(EngineError::PopulationTooSmall(opinions.len()));
        }
        Ok(Configuration { opinions })
    }

    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    pub fn opinions(&self) -> &[Opinion] {
        &self.opinions
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.opinions.iter().map(|o| o.value())
    }

    /// (min, max) over the population.
    pub fn extremes(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for o in &self.opinions {
            min = min.min(o.value());
            max = max.max(o.value());
        }
        (min, max)
    }

    /// Applies `rule` to agents `i` and `j` in place. Every other agent is
    /// untouched, bit for bit.
    pub fn apply_pair<R: InteractionRule>(&mut self, i: usize, j: usize, rule: &R) {
        debug_assert!(i != j);
        let (a, b) = rule.apply(self.opinions[i], self.opinions[j]);
        self.opinions[i] = a;
        self.opinions[j] = b;
    }
}

/// How interacting pairs are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SchedulerKind {
    /// One pair per step, uniform over all n-choose-2 pairs.
    UniformPair,
    /// One uniform perfect matching per round; every agent updates once.
    RandomMatching,
}

/// Initial opinion distribution for iid sampling.
#[derive(Debug, Clone)]
pub enum InitialDistribution {
    Uniform01,
    /// Resampling with replacement from a user-supplied list.
    EmpiricalSamples(Vec<f64>),
}

/// Draws `n` iid opinions from the distribution.
pub fn sample_initial(
    n: usize,
    distribution: &InitialDistribution,
    rng: &mut ChaCha8Rng,
) -> Result<Configuration, EngineError> {
    if n < 2 {
        return Err(EngineError::PopulationTooSmall(n));
    }
    match distribution {
        InitialDistribution::Uniform01 => {
            let values = (0..n).map(|_| rng.gen::<f64>()).collect();
            Configuration::new(values)
        }
        InitialDistribution::EmpiricalSamples(samples) => {
            if samples.is_empty() {
                return Err(EngineError::EmptySampleList);
            }
            for &v in samples {
                if !(0.0..=1.0).contains(&v) {
                    return Err(EngineError::ValueOutOfRange(v));
                }
            }
            let values = (0..n)
                .map(|_| samples[rng.gen_range(0..samples.len())])
                .collect();
            Configuration::new(values)
        }
    }
}

/// A trajectory state: configuration, step counter, and its own random
/// stream. Two states built from the same seed/stream/initial configuration
/// evolve identically under the same scheduler and rule.
#[derive(Debug, Clone)]
pub struct ProcessState {
    pub config: Configuration,
    pub time: u64,
    rng: ChaCha8Rng,
}

impl ProcessState {
    pub fn new(config: Configuration, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ProcessState {
            config,
            time: 0,
            rng,
        }
    }

    pub fn with_rng(config: Configuration, rng: ChaCha8Rng) -> Self {
        ProcessState {
            config,
            time: 0,
            rng,
        }
    }
}

/// Uniform draw from all unordered pairs over `n` agents.
pub(crate) fn draw_uniform_pair(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Uniform perfect matching over an even population: a uniform permutation
/// paired off consecutively. Every matching is induced by the same number
/// of permutations, so the result is uniform over matchings.
pub(crate) fn draw_matching(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    debug_assert!(n.is_multiple_of(2));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Advances the state by one scheduler step (one pair for `UniformPair`,
/// one full matching for `RandomMatching`); `time` increments by 1 either
/// way. Matched pairs are disjoint, so sequential application equals the
/// simultaneous update.
pub fn step<R: InteractionRule>(
    state: &mut ProcessState,
    scheduler: SchedulerKind,
    rule: &R,
) -> Result<(), EngineError> {
    let n = state.config.len();
    match scheduler {
        SchedulerKind::UniformPair => {
            let (i, j) = draw_uniform_pair(n, &mut state.rng);
            state.config.apply_pair(i, j, rule);
        }
        SchedulerKind::RandomMatching => {
            if !n.is_multiple_of(2) {
                return Err(EngineError::OddPopulation(n));
            }
            for (i, j) in draw_matching(n, &mut state.rng) {
                state.config.apply_pair(i, j, rule);
            }
        }
    }
    state.time += 1;
    Ok(())
}

/// Outcome kind of a trivialization check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeKind {
    Polarized,
    Consensus,
    NonTrivialized,
}

/// Classification of a configuration against the ε-neighborhoods of the
/// polarized and consensus configurations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrivialOutcome {
    pub kind: OutcomeKind,
    /// Consensus location (midpoint of min and max opinion) when consensual.
    pub alpha: Option<f64>,
    pub epsilon: f64,
    /// All agents sit within ε of a single pole; such a state lies in both
    /// the polarized and the consensus neighborhood and counts as polarized.
    pub degenerate_pole: bool,
}

/// Classifies `config` against the ε-neighborhoods: `Polarized` when every
/// opinion is within ε of a pole, `Consensus` when `max - min < 2ε`.
/// When both hold (all agents near one pole) the configuration counts as
/// polarized, with the degeneracy flagged.
pub fn classify(config: &Configuration, epsilon: f64) -> Result<TrivialOutcome, EngineError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(EngineError::InvalidEpsilon(epsilon));
    }
    let (min, max) = config.extremes();
    let polarized = config.values().all(|v| v < epsilon || v > 1.0 - epsilon);
    let consensus = max - min < 2.0 * epsilon;
    let outcome = if polarized {
        TrivialOutcome {
            kind: OutcomeKind::Polarized,
            alpha: None,
            epsilon,
            degenerate_pole: consensus,
        }
    } else if consensus {
        TrivialOutcome {
            kind: OutcomeKind::Consensus,
            alpha: Some((min + max) / 2.0),
            epsilon,
            degenerate_pole: false,
        }
    } else {
        TrivialOutcome {
            kind: OutcomeKind::NonTrivialized,
            alpha: None,
            epsilon,
            degenerate_pole: false,
        }
    };
    Ok(outcome)
}

/// Trajectory recording policy for [`run_to_trivialization`].
#[derive(Debug, Clone, Copy)]
pub enum TrajectoryMode {
    Off,
    /// Store every k-th state.
    Decimated(u64),
    /// Store every `max(1, max_steps / 1000)`-th state.
    Auto,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub epsilon: f64,
    pub max_steps: u64,
    pub trajectory: TrajectoryMode,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: TrivialOutcome,
    pub steps: u64,
    /// Decimated `(time, configuration)` samples, including the initial and
    /// final states, when recording was requested.
    pub trajectory: Option<Vec<(u64, Configuration)>>,
}

/// Iterates the process until it enters the ε-neighborhood of a trivialized
/// configuration or the step budget runs out (reported in-band as
/// `NonTrivialized`). The caller is responsible for choosing
/// `ε < min(τ/2, (1-τ)/2)` when the absorbing-set stopping semantics are
/// required.
pub fn run_to_trivialization<R: InteractionRule>(
    initial: Configuration,
    rule: &R,
    scheduler: SchedulerKind,
    run: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RunReport, EngineError> {
    if !(run.epsilon > 0.0 && run.epsilon < 0.5) {
        return Err(EngineError::InvalidEpsilon(run.epsilon));
    }
    if scheduler == SchedulerKind::RandomMatching && !initial.len().is_multiple_of(2) {
        return Err(EngineError::OddPopulation(initial.len()));
    }

    let keep_every = match run.trajectory {
        TrajectoryMode::Off => None,
        TrajectoryMode::Decimated(k) => Some(k.max(1)),
        TrajectoryMode::Auto => Some((run.max_steps / 1000).max(1)),
    };
    let mut trajectory = keep_every.map(|_| vec![(0, initial.clone())]);

    let mut state = ProcessState::with_rng(initial, rng.clone());
    loop {
        let outcome = classify(&state.config, run.epsilon)?;
        if outcome.kind != OutcomeKind::NonTrivialized || state.time >= run.max_steps {
            if let Some(t) = trajectory.as_mut() {
                if t.last().map(|(s, _)| *s) != Some(state.time) {
                    t.push((state.time, state.config.clone()));
                }
            }
            *rng = state.rng;
            return Ok(RunReport {
                outcome,
                steps: state.time,
                trajectory,
            });
        }
        step(&mut state, scheduler, rule)?;
        if let (Some(t), Some(k)) = (trajectory.as_mut(), keep_every) {
            if state.time.is_multiple_of(k) {
                t.push((state.time, state.config.clone()));
            }
        }
    }
}

/// Classification radius used by the polarization estimator:
/// `b = min(τ/2, (1-τ)/2)` scaled by 0.99 to stay strictly inside the
/// admissible range where the neighborhood is absorbing.
pub fn absorbing_epsilon(tau: f64) -> f64 {
    0.99 * (tau / 2.0).min((1.0 - tau) / 2.0)
}

/// Monte-Carlo estimate of the polarization probability at one `(τ, n)`
/// cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub tau: f64,
    pub n: usize,
    pub runs: u32,
    pub polarized_count: u32,
    /// Runs that exhausted the step budget; excluded from `p_hat`.
    pub nontrivialized: u32,
    /// Polarized fraction among trivialized runs.
    pub p_hat: f64,
    /// 95% normal-approximation binomial half-width.
    pub ci_halfwidth: f64,
    /// Mean steps to absorption over trivialized runs.
    pub mean_steps: f64,
    /// More than 1% of runs failed to trivialize within the budget.
    pub excessive_nontrivialized: bool,
}

/// Launches `runs` independent trajectories from iid uniform initials and
/// reports the polarized fraction. Per-run seeds are derived from
/// `master_seed`, so the result does not depend on worker scheduling.
pub fn estimate_p_polarization(
    params: &ModelParams,
    n: usize,
    runs: u32,
    scheduler: SchedulerKind,
    master_seed: u64,
    max_steps: u64,
) -> Result<SweepResult, EngineError> {
    if runs == 0 {
        return Err(EngineError::NoRuns);
    }
    if n < 2 {
        return Err(EngineError::PopulationTooSmall(n));
    }
    if scheduler == SchedulerKind::RandomMatching && !n.is_multiple_of(2) {
        return Err(EngineError::OddPopulation(n));
    }

    let rule = crate::kernel::AttractionRepulsion::new(*params);
    let epsilon = absorbing_epsilon(params.tau());
    let run_cfg = RunConfig {
        epsilon,
        max_steps,
        trajectory: TrajectoryMode::Off,
    };

    let outcomes: Vec<(OutcomeKind, u64)> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &[r as u64]));
            let initial = sample_initial(n, &InitialDistribution::Uniform01, &mut rng)
                .expect("n >= 2 checked above");
            let report = run_to_trivialization(initial, &rule, scheduler, &run_cfg, &mut rng)
                .expect("run parameters validated above");
            (report.outcome.kind, report.steps)
        })
        .collect();

    let mut polarized = 0u32;
    let mut nontrivialized = 0u32;
    let mut steps_sum = 0u64;
    for (kind, steps) in &outcomes {
        match kind {
            OutcomeKind::Polarized => {
                polarized += 1;
                steps_sum += steps;
            }
            OutcomeKind::Consensus => steps_sum += steps,
            OutcomeKind::NonTrivialized => nontrivialized += 1,
        }
    }
    let trivialized = runs - nontrivialized;
    let p_hat = if trivialized > 0 {
        f64::from(polarized) / f64::from(trivialized)
    } else {
        0.0
    };
    let ci_halfwidth = if trivialized > 0 {
        1.96 * (p_hat * (1.0 - p_hat) / f64::from(trivialized)).sqrt()
    } else {
        0.0
    };
    let mean_steps = if trivialized > 0 {
        steps_sum as f64 / f64::from(trivialized)
    } else {
        0.0
    };

    Ok(SweepResult {
        tau: params.tau(),
        n,
        runs,
        polarized_count: polarized,
        nontrivialized,
        p_hat,
        ci_halfwidth,
        mean_steps,
        excessive_nontrivialized: f64::from(nontrivialized) > 0.01 * f64::from(runs),
    })
}

/// Full `(τ, n)` cross-product sweep, ordered by `(n, τ)`. Each cell gets an
/// independently derived seed, so a sweep is reproducible cell by cell.
pub fn sweep(
    tau_grid: &[f64],
    n_list: &[usize],
    params_base: &ModelParams,
    runs: u32,
    scheduler: SchedulerKind,
    master_seed: u64,
    max_steps: u64,
) -> Result<Vec<SweepResult>, EngineError> {
    if tau_grid.is_empty() || n_list.is_empty() {
        return Err(EngineError::EmptyGrid);
    }
    let mut results = Vec::with_capacity(tau_grid.len() * n_list.len());
    for &n in n_list {
        for &tau in tau_grid {
            let params = ModelParams::new(tau, params_base.lambda(), params_base.mu())
                .map_err(|_| EngineError::InvalidTau(tau))?;
            let cell_seed = derive_seed(master_seed, &[n as u64, tau.to_bits()]);
            results.push(estimate_p_polarization(
                &params, n, runs, scheduler, cell_seed, max_steps,
            )?);
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::AttractionRepulsion;

    fn ar(tau: f64) -> AttractionRepulsion {
        AttractionRepulsion::new(ModelParams::new(tau, 0.5, 0.5).unwrap())
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn sample_initial_is_reproducible_and_in_range() {
        let a = sample_initial(4, &InitialDistribution::Uniform01, &mut rng(7)).unwrap();
        let b = sample_initial(4, &InitialDistribution::Uniform01, &mut rng(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.values().all(|v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn sample_initial_single_atom() {
        let c = sample_initial(
            3,
            &InitialDistribution::EmpiricalSamples(vec![0.5]),
            &mut rng(1),
        )
        .unwrap();
        assert_eq!(c.values().collect::<Vec<_>>(), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn sample_initial_rejects_bad_inputs() {
        assert_eq!(
            sample_initial(
                3,
                &InitialDistribution::EmpiricalSamples(vec![]),
                &mut rng(1)
            ),
            Err(EngineError::EmptySampleList)
        );
        assert_eq!(
            sample_initial(
                3,
                &InitialDistribution::EmpiricalSamples(vec![0.5, 1.5]),
                &mut rng(1)
            ),
            Err(EngineError::ValueOutOfRange(1.5))
        );
    }

    #[test]
    fn sample_initial_mean_matches_uniform() {
        // Law of large numbers at 4σ: σ = 1/(√12·√n) ≈ 0.0029 for n = 10^4.
        let c = sample_initial(10_000, &InitialDistribution::Uniform01, &mut rng(11)).unwrap();
        let mean = c.values().sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn two_agents_always_pick_the_only_pair() {
        let rule = ar(0.5);
        let mut state = ProcessState::new(Configuration::new(vec![0.2, 0.4]).unwrap(), 3, 0);
        step(&mut state, SchedulerKind::UniformPair, &rule).unwrap();
        let vals: Vec<f64> = state.config.values().collect();
        assert!((vals[0] - 0.25).abs() < 1e-15 && (vals[1] - 0.35).abs() < 1e-15);
        assert_eq!(state.time, 1);
    }

    #[test]
    fn forced_pair_leaves_bystanders_bit_identical() {
        let rule = ar(0.5);
        let mut config = Configuration::new(vec![0.2, 0.4, 0.9]).unwrap();
        config.apply_pair(0, 1, &rule);
        let vals: Vec<f64> = config.values().collect();
        assert!((vals[0] - 0.25).abs() < 1e-15 && (vals[1] - 0.35).abs() < 1e-15);
        assert_eq!(vals[2], 0.9); // bystander untouched, bit for bit
    }

    #[test]
    fn uniform_pair_step_changes_exactly_two_agents() {
        let rule = ar(0.45);
        let mut state = ProcessState::new(
            Configuration::new(vec![0.1, 0.3, 0.55, 0.8, 0.95]).unwrap(),
            9,
            0,
        );
        for _ in 0..50 {
            let before: Vec<f64> = state.config.values().collect();
            step(&mut state, SchedulerKind::UniformPair, &rule).unwrap();
            let after: Vec<f64> = state.config.values().collect();
            let changed = before
                .iter()
                .zip(&after)
                .filter(|(a, b)| a.to_bits() != b.to_bits())
                .count();
            assert!(changed <= 2);
        }
    }

    #[test]
    fn matching_covers_every_agent_once() {
        let mut r = rng(5);
        for _ in 0..100 {
            let pairs = draw_matching(8, &mut r);
            let mut seen = [false; 8];
            for (i, j) in pairs {
                assert!(!seen[i] && !seen[j]);
                seen[i] = true;
                seen[j] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn matching_is_uniform_over_the_three_n4_matchings() {
        // The three perfect matchings on 4 agents, keyed by the partner of
        // agent 0.
        let mut counts = [0u32; 4];
        let mut r = rng(17);
        let draws = 100_000;
        for _ in 0..draws {
            let pairs = draw_matching(4, &mut r);
            let partner = pairs
                .iter()
                .find_map(|&(i, j)| {
                    if i == 0 {
                        Some(j)
                    } else if j == 0 {
                        Some(i)
                    } else {
                        None
                    }
                })
                .unwrap();
            counts[partner] += 1;
        }
        for (partner, count) in counts.iter().enumerate().skip(1) {
            let freq = f64::from(*count) / f64::from(draws);
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "partner {partner}: {freq}");
        }
    }

    #[test]
    fn odd_population_rejects_matching() {
        let rule = ar(0.5);
        let mut state = ProcessState::new(Configuration::new(vec![0.1, 0.5, 0.9]).unwrap(), 1, 0);
        assert_eq!(
            step(&mut state, SchedulerKind::RandomMatching, &rule),
            Err(EngineError::OddPopulation(3))
        );
    }

    #[test]
    fn classify_examples() {
        let polar = classify(&Configuration::new(vec![0.01, 0.99, 0.995]).unwrap(), 0.05).unwrap();
        assert_eq!(polar.kind, OutcomeKind::Polarized);
        assert!(!polar.degenerate_pole);

        let cons = classify(&Configuration::new(vec![0.48, 0.50, 0.52]).unwrap(), 0.05).unwrap();
        assert_eq!(cons.kind, OutcomeKind::Consensus);
        assert_eq!(cons.alpha, Some(0.5));

        let degen = classify(&Configuration::new(vec![0.01, 0.02]).unwrap(), 0.05).unwrap();
        assert_eq!(degen.kind, OutcomeKind::Polarized);
        assert!(degen.degenerate_pole);
    }

    #[test]
    fn classify_rejects_bad_epsilon() {
        let c = Configuration::new(vec![0.1, 0.2]).unwrap();
        assert!(classify(&c, 0.0).is_err());
        assert!(classify(&c, 0.5).is_err());
    }

    #[test]
    fn repelling_pair_polarizes_quickly() {
        // Gap iterates 0.7, 0.85, 0.925 under the repulsion branch; the
        // state (0.0125, 0.95) is inside the ε = 0.1 polar neighborhood.
        let rule = ar(0.5);
        let run = RunConfig {
            epsilon: 0.1,
            max_steps: 100,
            trajectory: TrajectoryMode::Off,
        };
        let report = run_to_trivialization(
            Configuration::new(vec![0.1, 0.8]).unwrap(),
            &rule,
            SchedulerKind::UniformPair,
            &run,
            &mut rng(2),
        )
        .unwrap();
        assert_eq!(report.outcome.kind, OutcomeKind::Polarized);
        assert!(report.steps <= 4, "steps {}", report.steps);
    }

    #[test]
    fn attracting_pair_reaches_consensus_immediately() {
        let rule = ar(0.5);
        let run = RunConfig {
            epsilon: 0.1,
            max_steps: 100,
            trajectory: TrajectoryMode::Off,
        };
        let report = run_to_trivialization(
            Configuration::new(vec![0.4, 0.5]).unwrap(),
            &rule,
            SchedulerKind::UniformPair,
            &run,
            &mut rng(2),
        )
        .unwrap();
        assert_eq!(report.outcome.kind, OutcomeKind::Consensus);
        assert_eq!(report.steps, 0); // spread 0.1 < 2ε already
    }

    #[test]
    fn absorbed_initial_returns_zero_steps() {
        let rule = ar(0.5);
        let run = RunConfig {
            epsilon: 0.2,
            max_steps: 100,
            trajectory: TrajectoryMode::Off,
        };
        let report = run_to_trivialization(
            Configuration::new(vec![0.01, 0.99]).unwrap(),
            &rule,
            SchedulerKind::UniformPair,
            &run,
            &mut rng(4),
        )
        .unwrap();
        assert_eq!(report.steps, 0);
        assert_eq!(report.outcome.kind, OutcomeKind::Polarized);
    }

    #[test]
    fn absorbing_set_is_invariant_under_every_pair_choice() {
        // For configs inside the ε-neighborhood with ε < min(τ/2, (1-τ)/2),
        // applying any of the n-choose-2 pairs keeps the classification.
        let params = ModelParams::new(0.4, 0.5, 0.5).unwrap();
        let rule = AttractionRepulsion::new(params);
        let eps = absorbing_epsilon(params.tau());
        let polar = Configuration::new(vec![0.01, 0.03, 0.97, 0.99, 0.995]).unwrap();
        let cons = Configuration::new(vec![0.50, 0.52, 0.53, 0.55, 0.51]).unwrap();
        for config in [polar, cons] {
            let kind = classify(&config, eps).unwrap().kind;
            assert_ne!(kind, OutcomeKind::NonTrivialized);
            let n = config.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut next = config.clone();
                    next.apply_pair(i, j, &rule);
                    assert_eq!(classify(&next, eps).unwrap().kind, kind, "pair ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn trajectory_decimation_records_endpoints() {
        let rule = ar(0.5);
        let run = RunConfig {
            epsilon: 0.05,
            max_steps: 1000,
            trajectory: TrajectoryMode::Decimated(3),
        };
        let report = run_to_trivialization(
            Configuration::new(vec![0.1, 0.8]).unwrap(),
            &rule,
            SchedulerKind::UniformPair,
            &run,
            &mut rng(2),
        )
        .unwrap();
        let traj = report.trajectory.unwrap();
        assert_eq!(traj.first().unwrap().0, 0);
        assert_eq!(traj.last().unwrap().0, report.steps);
    }

    #[test]
    fn estimate_matches_exact_two_agent_computation() {
        // For n = 2 the trajectory is deterministic given the initial pair:
        // a gap above τ repels to the poles, a gap below contracts around a
        // fixed midpoint. The oracle integrates that outcome over the unit
        // square with a midpoint rule, independently of the engine's
        // stepping machinery.
        let tau = 0.4;
        let eps = absorbing_epsilon(tau);
        let exact = {
            let side = 1200;
            let mut polar = 0u64;
            let mut total = 0u64;
            for i in 0..side {
                for j in 0..side {
                    let x = (i as f64 + 0.5) / side as f64;
                    let y = (j as f64 + 0.5) / side as f64;
                    total += 1;
                    if two_agent_polarizes(x, y, tau, 0.5, 0.5, eps) {
                        polar += 1;
                    }
                }
            }
            polar as f64 / total as f64
        };
        let result = estimate_p_polarization(
            &ModelParams::new(tau, 0.5, 0.5).unwrap(),
            2,
            10_000,
            SchedulerKind::UniformPair,
            99,
            10_000,
        )
        .unwrap();
        assert_eq!(result.nontrivialized, 0);
        // 4σ Monte-Carlo band plus the quadrature pixel error.
        let sigma = (exact * (1.0 - exact) / 10_000.0).sqrt();
        assert!(
            (result.p_hat - exact).abs() < 4.0 * sigma + 0.005,
            "p_hat {} vs exact {exact}",
            result.p_hat
        );
    }

    /// Independent 2-agent outcome: direct iteration of the closed-form gap
    /// dynamics with first-entry classification.
    fn two_agent_polarizes(x: f64, y: f64, tau: f64, lambda: f64, mu: f64, eps: f64) -> bool {
        let (mut lo, mut hi) = if x <= y { (x, y) } else { (y, x) };
        for _ in 0..10_000 {
            let near_pole = |v: f64| v < eps || v > 1.0 - eps;
            let polarized = near_pole(lo) && near_pole(hi);
            let consensus = hi - lo < 2.0 * eps;
            if polarized {
                return true;
            }
            if consensus {
                return false;
            }
            if hi - lo <= tau {
                let shift = lambda / 2.0 * (hi - lo);
                lo += shift;
                hi -= shift;
            } else {
                lo *= 1.0 - mu;
                hi = 1.0 - (1.0 - mu) * (1.0 - hi);
            }
        }
        false
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let base = ModelParams::new(0.5, 0.5, 0.5).unwrap();
        let taus = [0.3, 0.5, 0.7];
        let ns = [2, 4];
        let a = sweep(
            &taus,
            &ns,
            &base,
            20,
            SchedulerKind::UniformPair,
            123,
            100_000,
        )
        .unwrap();
        let b = sweep(
            &taus,
            &ns,
            &base,
            20,
            SchedulerKind::UniformPair,
            123,
            100_000,
        )
        .unwrap();
        assert_eq!(a.len(), 6);
        // Ordered by (n, τ).
        assert_eq!(a[0].n, 2);
        assert_eq!(a[3].n, 4);
        assert!(a[0].tau < a[1].tau && a[1].tau < a[2].tau);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.polarized_count, rb.polarized_count);
            assert_eq!(ra.p_hat.to_bits(), rb.p_hat.to_bits());
            assert_eq!(ra.mean_steps.to_bits(), rb.mean_steps.to_bits());
        }
    }
}
