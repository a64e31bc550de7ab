//! Deterministic forcing schedules and energy diagnostics.
//!
//! Any configuration can be driven into the ε-neighborhood of a trivialized
//! configuration by a finite, deterministic sequence of pair choices. The
//! schedule splits on the threshold:
//!
//! * `τ < 1/2`, all pairs within `τ`: repeatedly contract the
//!   maximum-distance pair until the spread drops below `2ε`.
//! * `τ < 1/2`, some pair beyond `τ`: repel that pair until both agents sit
//!   within `δ` of opposite poles, then sweep every remaining agent against
//!   the anchor at the opposite half until it, too, is within `ε` of a pole.
//! * `τ ≥ 1/2`, a consecutive-point gap exceeds `τ`: repeatedly repel
//!   across the largest gap until it swallows the whole interval.
//! * `τ ≥ 1/2` otherwise: contract the maximum-distance pair among pairs
//!   closer than `τ` until one of the previous cases applies.
//!
//! Such a `T`-step schedule occurs spontaneously under the uniform-pair
//! scheduler with probability `(n choose 2)^{-T}`, which is what makes it a
//! constructive witness that the absorbing neighborhood is reachable from
//! everywhere.
//!
//! The energy `h(φ) = Σ_{i<j} |τ - |φ_i - φ_j||` is a sub-martingale of the
//! uniform-pair process for `n = 3` but not for `n ≥ 4`; the exact one-step
//! conditional expectation and a counterexample search probe exactly that.

use crate::engine::{classify, Configuration, OutcomeKind};
use crate::kernel::{AttractionRepulsion, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("epsilon {0} must lie in (0, min(tau/2, (1-tau)/2)) for forcing")]
    EpsilonNotAbsorbing(f64),
    #[error("population must have at least 2 agents")]
    PopulationTooSmall,
}

/// An ordered list of forced pair choices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairSequence(pub Vec<(usize, usize)>);

impl PairSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The deterministic process forced along a pair sequence, from the start
/// configuration to the terminal state.
#[derive(Debug, Clone)]
pub struct ForcedTrajectory {
    /// `states.len() == sequence.len() + 1`; consecutive states differ only
    /// at the forced pair.
    pub states: Vec<Configuration>,
    pub sequence: PairSequence,
    pub reached: bool,
    pub terminal_kind: Option<OutcomeKind>,
}

/// Default forcing budget: `200·n·⌈ln(1/ε)⌉`. The per-branch geometric
/// contraction/expansion rates make a logarithmic budget per agent
/// sufficient, with a wide safety factor.
pub fn default_forcing_budget(n: usize, epsilon: f64) -> usize {
    200 * n * (1.0 / epsilon).ln().ceil() as usize
}

fn admissible(params: &ModelParams, epsilon: f64) -> bool {
    epsilon > 0.0 && epsilon < (params.tau() / 2.0).min((1.0 - params.tau()) / 2.0)
}

/// Chooses the next forced pair for the current configuration. Stateless:
/// the case analysis is re-derived from the configuration each step. Ties
/// break to the lexicographically smallest index pair.
fn choose_forced_pair(values: &[f64], params: &ModelParams, epsilon: f64) -> (usize, usize) {
    let n = values.len();
    let tau = params.tau();

    let max_distance_pair = |cap: Option<f64>| -> Option<(usize, usize)> {
        let mut best: Option<(f64, (usize, usize))> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (values[i] - values[j]).abs();
                if d <= 0.0 {
                    continue;
                }
                if let Some(cap) = cap {
                    if d >= cap {
                        continue;
                    }
                }
                if best.map(|(bd, _)| d > bd).unwrap_or(true) {
                    best = Some((d, (i, j)));
                }
            }
        }
        best.map(|(_, p)| p)
    };

    let argmin_argmax = || -> (usize, usize) {
        let mut lo = 0;
        let mut hi = 0;
        for k in 1..n {
            if values[k] < values[lo] {
                lo = k;
            }
            if values[k] > values[hi] {
                hi = k;
            }
        }
        (lo, hi)
    };

    let (lo_idx, hi_idx) = argmin_argmax();
    let spread = values[hi_idx] - values[lo_idx];

    if tau < 0.5 {
        if spread <= tau {
            // All pairs attract; contract the extremes.
            return order(lo_idx, hi_idx);
        }
        // Drive the extreme pair to opposite poles, then sweep the rest.
        let delta = epsilon.min((0.5 - tau) / 2.0);
        if values[lo_idx] >= delta || values[hi_idx] <= 1.0 - delta {
            return order(lo_idx, hi_idx);
        }
        for (k, &v) in values.iter().enumerate() {
            if k == lo_idx || k == hi_idx {
                continue;
            }
            if v.min(1.0 - v) >= epsilon {
                // Pair against the anchor on the opposite half so the
                // encounter repels.
                return if v <= 0.5 {
                    order(k, hi_idx)
                } else {
                    order(lo_idx, k)
                };
            }
        }
        // Every agent is already within ε of a pole; the caller's classify
        // check fires before this is reached.
        order(lo_idx, hi_idx)
    } else {
        if spread < tau {
            return order(lo_idx, hi_idx);
        }
        if let Some(pair) = largest_gap_over_tau(values, tau) {
            return pair;
        }
        // No consecutive gap beyond τ: contract the widest sub-τ pair.
        if let Some(pair) = max_distance_pair(Some(tau)) {
            return pair;
        }
        // Only gaps of exactly τ remain; the tie still attracts.
        max_distance_pair(None).unwrap_or((0, 1))
    }
}

fn order(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// The agents adjacent to the largest gap between consecutive sorted
/// opinions, provided that gap exceeds `τ`.
fn largest_gap_over_tau(values: &[f64], tau: f64) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut best: Option<(f64, (usize, usize))> = None;
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let gap = values[b] - values[a];
        let pair = order(a, b);
        let better = match best {
            None => true,
            Some((bg, bp)) => gap > bg || (gap == bg && pair < bp),
        };
        if better {
            best = Some((gap, pair));
        }
    }
    match best {
        Some((gap, pair)) if gap > tau => Some(pair),
        _ => None,
    }
}

/// Constructs a deterministic pair schedule that drives `config` into the
/// ε-neighborhood of a trivialized configuration under the
/// attraction-repulsion rule, or gives up after `max_len` forced steps.
pub fn forcing_sequence(
    config: &Configuration,
    params: &ModelParams,
    epsilon: f64,
    max_len: usize,
) -> Result<ForcedTrajectory, OracleError> {
    if !admissible(params, epsilon) {
        return Err(OracleError::EpsilonNotAbsorbing(epsilon));
    }
    let rule = AttractionRepulsion::new(*params);
    let mut states = vec![config.clone()];
    let mut pairs = Vec::new();
    loop {
        let current = states.last().unwrap();
        let outcome = classify(current, epsilon).expect("epsilon validated");
        if outcome.kind != OutcomeKind::NonTrivialized {
            return Ok(ForcedTrajectory {
                states,
                sequence: PairSequence(pairs),
                reached: true,
                terminal_kind: Some(outcome.kind),
            });
        }
        if pairs.len() >= max_len {
            return Ok(ForcedTrajectory {
                states,
                sequence: PairSequence(pairs),
                reached: false,
                terminal_kind: None,
            });
        }
        let values: Vec<f64> = current.values().collect();
        let (i, j) = choose_forced_pair(&values, params, epsilon);
        let mut next = current.clone();
        next.apply_pair(i, j, &rule);
        states.push(next);
        pairs.push((i, j));
    }
}

/// True iff the forcing schedule reaches the absorbing neighborhood within
/// the default budget. Property-test oracle over random configurations.
pub fn verify_forcing(
    config: &Configuration,
    params: &ModelParams,
    epsilon: f64,
) -> Result<bool, OracleError> {
    let budget = default_forcing_budget(config.len(), epsilon);
    Ok(forcing_sequence(config, params, epsilon, budget)?.reached)
}

/// The pairwise energy `h(φ) = Σ_{i<j} |τ - |φ_i - φ_j||`.
pub fn h_energy(config: &Configuration, tau: f64) -> f64 {
    let v: Vec<f64> = config.values().collect();
    let mut h = 0.0;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            h += (tau - (v[i] - v[j]).abs()).abs();
        }
    }
    h
}

/// Exact one-step conditional expectation of `h` under the uniform-pair
/// scheduler.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub h_value: f64,
    pub expected_next_h: f64,
    /// `expected_next_h - h_value`; negative values witness the failure of
    /// the sub-martingale property.
    pub delta: f64,
    pub per_pair_outcomes: Vec<((usize, usize), f64)>,
}

/// Enumerates all n-choose-2 pair choices, applies the attraction-repulsion
/// rule to each, and averages the resulting energies. No sampling.
pub fn expected_h_change(config: &Configuration, params: &ModelParams) -> EnergyReport {
    let rule = AttractionRepulsion::new(*params);
    let tau = params.tau();
    let n = config.len();
    let h_value = h_energy(config, tau);
    let mut per_pair_outcomes = Vec::with_capacity(n * (n - 1) / 2);
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut next = config.clone();
            next.apply_pair(i, j, &rule);
            let h_after = h_energy(&next, tau);
            per_pair_outcomes.push(((i, j), h_after));
            sum += h_after;
        }
    }
    let expected_next_h = sum / per_pair_outcomes.len() as f64;
    EnergyReport {
        h_value,
        expected_next_h,
        delta: expected_next_h - h_value,
        per_pair_outcomes,
    }
}

/// A configuration witnessing `E[h(Φ_{t+1}) | Φ_t] < h(Φ_t)`.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub config: Vec<f64>,
    pub delta: f64,
    pub h_value: f64,
}

/// Threshold separating genuine negative drifts from accumulated rounding.
pub const COUNTEREXAMPLE_THRESHOLD: f64 = -1e-9;

/// Random search plus local descent for a configuration with negative
/// expected energy change. 90% of the budget goes to uniform sampling, the
/// remainder to coordinate descent around the best candidate. Returns a
/// witness with `delta < -1e-9`, or `None` if the budget is exhausted.
pub fn find_submartingale_counterexample(
    n: usize,
    params: &ModelParams,
    budget: usize,
    seed: u64,
) -> Result<Option<Counterexample>, OracleError> {
    if n < 2 {
        return Err(OracleError::PopulationTooSmall);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta_of = |values: &[f64]| -> f64 {
        let config = Configuration::new(values.to_vec()).expect("values in range");
        expected_h_change(&config, params).delta
    };

    let random_budget = budget * 9 / 10;
    let mut best: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let mut best_delta = delta_of(&best);
    let mut spent = 1usize;

    while spent < random_budget {
        let candidate: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let d = delta_of(&candidate);
        spent += 1;
        if d < best_delta {
            best_delta = d;
            best = candidate;
        }
    }

    // Coordinate descent over shrinking step sizes around the best sample.
    let scales = [0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
    'descent: loop {
        let mut improved = false;
        for &scale in &scales {
            for k in 0..n {
                for dir in [-1.0, 1.0] {
                    if spent >= budget {
                        break 'descent;
                    }
                    let mut candidate = best.clone();
                    candidate[k] = (candidate[k] + dir * scale).clamp(0.0, 1.0);
                    let d = delta_of(&candidate);
                    spent += 1;
                    if d < best_delta {
                        best_delta = d;
                        best = candidate;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    if best_delta < COUNTEREXAMPLE_THRESHOLD {
        let config = Configuration::new(best.clone()).expect("values in range");
        Ok(Some(Counterexample {
            config: best,
            delta: best_delta,
            h_value: h_energy(&config, params.tau()),
        }))
    } else {
        Ok(None)
    }
}
