//! Experiment dispatch: maps a validated config onto the core modules,
//! writes the data files, and assembles the run manifest.

use crate::config::{ExperimentConfig, ExperimentKind, RuleName};
use crate::output::{fmt_real, write_json, CsvWriter};
use crate::CliError;
use polarlab_core::engine::{self, sample_initial, InitialDistribution, RunConfig, TrajectoryMode};
use polarlab_core::geometry;
use polarlab_core::kernel::{AttractionRepulsion, BoundedConfidence, ModelParams};
use polarlab_core::meanfield::{self, DensityGrid, PdeError, PdeParams};
use polarlab_core::oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Everything needed to reproduce and audit a run. Re-running with the
/// echoed config and seed reproduces the data files byte for byte
/// (timestamps excluded).
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub started: String,
    pub finished: String,
    pub config_echo: ExperimentConfig,
    pub output_files: Vec<String>,
}

fn pde_params(config: &ExperimentConfig, model: ModelParams) -> PdeParams {
    let section = config.pde.as_ref().expect("pde section present");
    PdeParams {
        model,
        dt: section.dt,
        grid_size: section.grid_size,
        t_max: section.t_max,
        classify_window: section.classify_window,
        classify_mass: section.classify_mass,
    }
}

fn numeric(e: PdeError) -> CliError {
    match e {
        PdeError::Instability { .. } | PdeError::InvalidBracket(_) => {
            CliError::Numerics(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

/// Runs the experiment into `output_dir` and returns the manifest
/// (already written there as `manifest.json`).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let out_dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(CliError::io(out_dir.display().to_string()))?;

    let mut files = match config.experiment {
        ExperimentKind::Simulate => run_simulate(config, &out_dir)?,
        ExperimentKind::Sweep => run_sweep(config, &out_dir)?,
        ExperimentKind::Pde => run_pde(config, &out_dir)?,
        ExperimentKind::CriticalTau => run_critical_tau(config, &out_dir)?,
        ExperimentKind::ForceCheck => run_force_check(config, &out_dir)?,
        ExperimentKind::Martingale => run_martingale(config, &out_dir)?,
        ExperimentKind::Multidim => run_multidim(config, &out_dir)?,
        ExperimentKind::RuleCheck => run_rule_check(config, &out_dir)?,
    };
    files.push("manifest.json".into());
    files.sort();

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.seed,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        config_echo: config.clone(),
        output_files: files,
    };
    let manifest_value = serde_json::to_value(&manifest)
        .map_err(|e| CliError::Config(format!("manifest serialization failed: {e}")))?;
    write_json(&out_dir.join("manifest.json"), &manifest_value)?;
    Ok(manifest)
}

fn run_simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.simulate.as_ref().expect("validated");
    let params = config.model_params()?;
    let rule = AttractionRepulsion::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = sample_initial(section.n, &InitialDistribution::Uniform01, &mut rng)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let report = engine::run_to_trivialization(
        initial,
        &rule,
        section.scheduler.into(),
        &RunConfig {
            epsilon: section.epsilon,
            max_steps: section.max_steps,
            trajectory: TrajectoryMode::Decimated(section.snapshot_every),
        },
        &mut rng,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut csv = CsvWriter::create(&out_dir.join("trajectory.csv"), "t,agent,opinion")?;
    for (t, state) in report.trajectory.iter().flatten() {
        for (agent, value) in state.values().enumerate() {
            csv.row(&[t.to_string(), agent.to_string(), fmt_real(value)])?;
        }
    }
    csv.finish()?;
    println!(
        "simulate: {:?} after {} steps (epsilon {})",
        report.outcome.kind, report.steps, section.epsilon
    );
    Ok(vec!["trajectory.csv".into()])
}

fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.sweep.as_ref().expect("validated");
    let base = ModelParams::new(0.5, config.model.lambda, config.model.mu)
        .map_err(|e| CliError::Config(format!("model: {e}")))?;
    let results = engine::sweep(
        &section.tau_grid,
        &section.n_list,
        &base,
        section.runs,
        section.scheduler.into(),
        config.seed,
        section.max_steps,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut csv = CsvWriter::create(
        &out_dir.join("sweep.csv"),
        "n,tau,runs,polarized,p_hat,ci95,mean_steps,nontrivialized",
    )?;
    for r in &results {
        csv.row(&[
            r.n.to_string(),
            fmt_real(r.tau),
            r.runs.to_string(),
            r.polarized_count.to_string(),
            fmt_real(r.p_hat),
            fmt_real(r.ci_halfwidth),
            fmt_real(r.mean_steps),
            r.nontrivialized.to_string(),
        ])?;
    }
    csv.finish()?;
    if let Some(flagged) = results.iter().find(|r| r.excessive_nontrivialized) {
        eprintln!(
            "warning: cell (n={}, tau={}) left {} of {} runs nontrivialized",
            flagged.n, flagged.tau, flagged.nontrivialized, flagged.runs
        );
    }
    Ok(vec!["sweep.csv".into()])
}

fn run_pde(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.pde.as_ref().expect("validated");
    let params = pde_params(config, config.model_params()?);
    let initial = DensityGrid::uniform(params.grid_size).map_err(numeric)?;
    let evolution =
        meanfield::evolve(&initial, &params, &section.snapshot_times).map_err(numeric)?;

    let mut csv = CsvWriter::create(&out_dir.join("density.csv"), "t,x,f")?;
    for (t, grid) in &evolution.snapshots {
        for (k, value) in grid.values().iter().enumerate() {
            csv.row(&[fmt_real(*t), fmt_real(grid.node(k)), fmt_real(*value)])?;
        }
    }
    csv.finish()?;
    println!(
        "pde: {:?} after {} steps (pole mass {:.4}, center mass {:.4})",
        evolution.limit.kind,
        evolution.steps,
        evolution.limit.pole_mass,
        evolution.limit.center_mass
    );
    Ok(vec!["density.csv".into()])
}

fn run_critical_tau(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.critical_tau.as_ref().expect("validated");
    // The bracket endpoints supply tau; model.tau is not used here.
    let model = ModelParams::new(0.5, config.model.lambda, config.model.mu)
        .map_err(|e| CliError::Config(format!("model: {e}")))?;
    let params = pde_params(config, model);
    let result = meanfield::find_critical_tau(&params, section.lo, section.hi, section.tol)
        .map_err(numeric)?;
    write_json(
        &out_dir.join("critical_tau.json"),
        &json!({
            "tau_c": result.tau_c,
            "iterations": result.iterations,
            "bracket": [result.lo, result.hi],
            "tol": section.tol,
        }),
    )?;
    println!(
        "critical-tau: tau_c = {:.6} ({} iterations)",
        result.tau_c, result.iterations
    );
    Ok(vec!["critical_tau.json".into()])
}

fn run_force_check(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.force_check.as_ref().expect("validated");
    let params = config.model_params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut failures = Vec::new();
    for trial in 0..section.trials {
        let values: Vec<f64> = (0..section.n).map(|_| rng.gen()).collect();
        let config = engine::Configuration::new(values).expect("n >= 2 validated");
        let reached = oracle::verify_forcing(&config, &params, section.epsilon)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !reached {
            failures.push(trial);
        }
    }
    write_json(
        &out_dir.join("force_check.json"),
        &json!({
            "n": section.n,
            "trials": section.trials,
            "epsilon": section.epsilon,
            "reached": section.trials as usize - failures.len(),
            "all_reached": failures.is_empty(),
            "failed_trials": failures,
        }),
    )?;
    Ok(vec!["force_check.json".into()])
}

fn run_martingale(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.martingale.as_ref().expect("validated");
    let params = config.model_params()?;
    let found =
        oracle::find_submartingale_counterexample(section.n, &params, section.budget, config.seed)
            .map_err(|e| CliError::Config(e.to_string()))?;
    let value = match &found {
        Some(witness) => json!({
            "found": true,
            "n": section.n,
            "config": witness.config,
            "delta": witness.delta,
            "h_value": witness.h_value,
        }),
        None => json!({
            "found": false,
            "n": section.n,
            "budget": section.budget,
        }),
    };
    write_json(&out_dir.join("counterexample.json"), &value)?;
    println!(
        "martingale: counterexample {} (n = {}, budget = {})",
        if found.is_some() {
            "found"
        } else {
            "not found"
        },
        section.n,
        section.budget
    );
    Ok(vec!["counterexample.json".into()])
}

fn run_multidim(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.multidim.as_ref().expect("validated");
    let domain = config.domain()?;
    let tau = config.model.tau.expect("validated");
    let model =
        ModelParams::with_tau_limit(tau, config.model.lambda, config.model.mu, domain.diameter())
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
    let result = geometry::run_multidim(&geometry::MultiDimConfig {
        n: section.n,
        params: model,
        domain,
        scheduler: section.scheduler.into(),
        epsilon: section.epsilon,
        max_rounds: section.max_rounds,
        seed: config.seed,
        snapshot_every: Some(section.snapshot_every),
    })
    .map_err(|e| CliError::Config(e.to_string()))?;

    let coords: Vec<String> = (1..=section.dim).map(|d| format!("x{d}")).collect();
    let mut csv = CsvWriter::create(
        &out_dir.join("points.csv"),
        &format!("round,agent,{}", coords.join(",")),
    )?;
    for (round, points) in &result.snapshots {
        for (agent, point) in points.iter().enumerate() {
            let mut fields = vec![round.to_string(), agent.to_string()];
            fields.extend(point.coords.iter().map(|c| fmt_real(*c)));
            csv.row(&fields)?;
        }
    }
    csv.finish()?;
    println!(
        "multidim: {:?} after {} rounds, {} clusters",
        result.label,
        result.rounds,
        result.clusters.clusters.len()
    );
    Ok(vec!["points.csv".into()])
}

fn run_rule_check(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let section = config.rule_check.as_ref().expect("validated");
    let params = config.model_params()?;
    let report = match section.rule {
        RuleName::AttractionRepulsion => polarlab_core::kernel::check_rule_contract(
            &AttractionRepulsion::new(params),
            params.tau(),
            section.samples,
            config.seed,
        ),
        RuleName::BoundedConfidence => polarlab_core::kernel::check_rule_contract(
            &BoundedConfidence::new(params),
            params.tau(),
            section.samples,
            config.seed,
        ),
    };
    let value = json!({
        "rule": section.rule,
        "tau": params.tau(),
        "lambda": params.lambda(),
        "mu": params.mu(),
        "samples": section.samples,
        "report": serde_json::to_value(&report)
            .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?,
    });
    write_json(&out_dir.join("rule_report.json"), &value)?;
    println!(
        "rule-check: all_ok = {} ({} violations)",
        report.all_ok(),
        report.violations.len()
    );
    Ok(vec!["rule_report.json".into()])
}

/// Resolves the worker count (flag > config > POLARLAB_WORKERS) and runs
/// `run_experiment` inside a dedicated thread pool of that size. Results
/// are a pure function of the seed, so the pool size only affects wall
/// time.
pub fn run_with_workers(
    config: &ExperimentConfig,
    workers_flag: Option<usize>,
) -> Result<RunManifest, CliError> {
    let workers = workers_flag.or(config.workers).or_else(|| {
        std::env::var("POLARLAB_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    match workers {
        Some(count) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(count.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
            pool.install(|| run_experiment(config))
        }
        None => run_experiment(config),
    }
}
