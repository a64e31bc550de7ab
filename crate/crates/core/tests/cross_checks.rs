//! Consistency checks across modules: the density solver against a
//! particle simulation, and the D-dimensional dynamic against the
//! one-dimensional engine.

use polarlab_core::engine::{
    classify, run_to_trivialization, sample_initial, Configuration, InitialDistribution,
    OutcomeKind, RunConfig, SchedulerKind, TrajectoryMode,
};
use polarlab_core::geometry::{run_multidim, DomainKind, MultiDimConfig, OutcomeLabel};
use polarlab_core::kernel::{AttractionRepulsion, ModelParams};
use polarlab_core::meanfield::{evolve, DensityGrid, LimitKind, PdeParams};
use polarlab_core::seeding::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// With a very large threshold every encounter attracts, so both the
/// density solver and a particle population started from a symmetric
/// triangle peak must contract to the center.
#[test]
fn triangle_peak_contracts_to_consensus_in_both_models() {
    let params = ModelParams::new(0.9, 0.5, 0.5).unwrap();

    let m = 200usize;
    let values: Vec<f64> = (0..=m)
        .map(|k| {
            let x = k as f64 / m as f64;
            1.0 - (x - 0.5).abs()
        })
        .collect();
    let mut pde = PdeParams::new(params);
    pde.grid_size = m;
    pde.t_max = 60.0;
    let evolution = evolve(&DensityGrid::from_values(values).unwrap(), &pde, &[]).unwrap();
    assert_eq!(evolution.limit.kind, LimitKind::ConsensusDensity);

    // Particle side: inverse-CDF samples of the same triangle density.
    let n = 10_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(90210);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        // density 2(1-|x-1/2|)·... normalized triangle on [0,1] peaking at 1/2
        let x = if u < 0.5 {
            (u / 2.0).sqrt()
        } else {
            1.0 - ((1.0 - u) / 2.0).sqrt()
        };
        samples.push(x.clamp(0.0, 1.0));
    }
    let rule = AttractionRepulsion::new(params);
    let report = run_to_trivialization(
        Configuration::new(samples).unwrap(),
        &rule,
        SchedulerKind::RandomMatching,
        &RunConfig {
            epsilon: polarlab_core::engine::absorbing_epsilon(params.tau()),
            max_steps: 10_000,
            trajectory: TrajectoryMode::Off,
        },
        &mut rng,
    )
    .unwrap();
    assert_eq!(report.outcome.kind, OutcomeKind::Consensus);
    let alpha = report.outcome.alpha.unwrap();
    assert!((alpha - 0.5).abs() < 0.05, "consensus at {alpha}");
}

/// On the one-dimensional hypercube the geometric dynamic consumes the
/// same random stream as the engine, so outcomes must agree seed by seed.
#[test]
fn one_dimensional_runs_match_the_engine_seed_for_seed() {
    let tau = 0.45;
    let params = ModelParams::new(tau, 0.5, 0.5).unwrap();
    let rule = AttractionRepulsion::new(params);
    let n = 12usize;
    let line = DomainKind::hypercube(1).unwrap();

    for seed in 0..12u64 {
        let mut cfg = MultiDimConfig::new(n, params, line, seed);
        cfg.scheduler = SchedulerKind::RandomMatching;
        let geo = run_multidim(&cfg).unwrap();
        assert!(geo.stationary, "seed {seed} did not settle");

        // Mirror the geometry run's stream: same derived seed, same draw
        // order (n initial uniforms, then one matching per round).
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[n as u64]));
        let initial = sample_initial(n, &InitialDistribution::Uniform01, &mut rng).unwrap();
        let report = run_to_trivialization(
            initial,
            &rule,
            SchedulerKind::RandomMatching,
            &RunConfig {
                epsilon: polarlab_core::engine::absorbing_epsilon(tau),
                max_steps: 10_000,
                trajectory: TrajectoryMode::Off,
            },
            &mut rng,
        )
        .unwrap();

        // A whole population within epsilon of a single pole classifies as
        // (degenerate) polarization in the engine but forms one cluster in
        // the geometric summary.
        let expected = match (report.outcome.kind, report.outcome.degenerate_pole) {
            (OutcomeKind::Polarized, false) => OutcomeLabel::Polarized,
            (OutcomeKind::Polarized, true) | (OutcomeKind::Consensus, _) => OutcomeLabel::Consensus,
            (OutcomeKind::NonTrivialized, _) => continue,
        };
        assert_eq!(
            geo.label, expected,
            "seed {seed}: engine {:?}",
            report.outcome
        );

        // The geometric endpoint must itself classify the same way in the
        // engine's terms.
        let final_values: Vec<f64> = geo.final_points.iter().map(|p| p.coords[0]).collect();
        let final_outcome = classify(
            &Configuration::new(final_values).unwrap(),
            polarlab_core::engine::absorbing_epsilon(tau),
        )
        .unwrap();
        assert_eq!(final_outcome.kind, report.outcome.kind, "seed {seed}");
    }
}
