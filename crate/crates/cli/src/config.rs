//! Strict experiment configuration.
//!
//! One TOML document per experiment. Unknown keys are rejected (a typo
//! silently falling back to a default is the main reproducibility hazard
//! in sweep tooling), required keys are checked per experiment kind, and
//! every numeric range is validated up front. The fully resolved
//! configuration (defaults included) is echoed into the run manifest.

use crate::CliError;
use polarlab_core::engine::SchedulerKind;
use polarlab_core::geometry::DomainKind;
use polarlab_core::kernel::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Sweep,
    Pde,
    CriticalTau,
    ForceCheck,
    Martingale,
    Multidim,
    RuleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerName {
    UniformPair,
    RandomMatching,
}

impl From<SchedulerName> for SchedulerKind {
    fn from(name: SchedulerName) -> SchedulerKind {
        match name {
            SchedulerName::UniformPair => SchedulerKind::UniformPair,
            SchedulerName::RandomMatching => SchedulerKind::RandomMatching,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    BoundedConfidence,
    AttractionRepulsion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainName {
    Hypercube,
    UnitDisk,
}

/// Raw document shape. Everything optional here; requiredness depends on
/// the experiment kind and is enforced in [`parse_config`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    seed: u64,
    output_dir: Option<String>,
    workers: Option<usize>,
    model: Option<RawModel>,
    simulate: Option<RawSimulate>,
    sweep: Option<RawSweep>,
    pde: Option<RawPde>,
    critical_tau: Option<RawCriticalTau>,
    force_check: Option<RawForceCheck>,
    martingale: Option<RawMartingale>,
    multidim: Option<RawMultidim>,
    rule_check: Option<RawRuleCheck>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    tau: Option<f64>,
    lambda: f64,
    mu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    n: usize,
    scheduler: Option<SchedulerName>,
    max_steps: Option<u64>,
    epsilon: Option<f64>,
    snapshot_every: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    tau_grid: Vec<f64>,
    n_list: Vec<usize>,
    runs: u32,
    scheduler: Option<SchedulerName>,
    max_steps: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPde {
    grid_size: Option<usize>,
    dt: Option<f64>,
    t_max: Option<f64>,
    snapshot_times: Option<Vec<f64>>,
    classify_window: Option<f64>,
    classify_mass: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCriticalTau {
    lo: f64,
    hi: f64,
    tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForceCheck {
    n: usize,
    trials: u32,
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMartingale {
    n: usize,
    budget: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMultidim {
    n: usize,
    domain: DomainName,
    dim: Option<usize>,
    scheduler: Option<SchedulerName>,
    epsilon: Option<f64>,
    max_rounds: Option<u64>,
    snapshot_every: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuleCheck {
    rule: RuleName,
    samples: usize,
}

/// Fully resolved model parameters as echoed in the manifest.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelSection {
    pub tau: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
}

/// A validated experiment, defaults resolved.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output_dir: String,
    pub workers: Option<usize>,
    pub model: ModelSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_tau: Option<CriticalTauConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_check: Option<ForceCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub martingale: Option<MartingaleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multidim: Option<MultidimConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_check: Option<RuleCheckConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub n: usize,
    pub scheduler: SchedulerName,
    pub max_steps: u64,
    pub epsilon: f64,
    pub snapshot_every: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub tau_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub runs: u32,
    pub scheduler: SchedulerName,
    pub max_steps: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeConfig {
    pub grid_size: usize,
    pub dt: f64,
    pub t_max: f64,
    pub snapshot_times: Vec<f64>,
    pub classify_window: f64,
    pub classify_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalTauConfig {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForceCheckConfig {
    pub n: usize,
    pub trials: u32,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleConfig {
    pub n: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultidimConfig {
    pub n: usize,
    pub domain: DomainName,
    pub dim: usize,
    pub scheduler: SchedulerName,
    pub epsilon: f64,
    pub max_rounds: u64,
    pub snapshot_every: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleCheckConfig {
    pub rule: RuleName,
    pub samples: usize,
}

impl ExperimentConfig {
    /// Model parameters for experiments that need a concrete `tau`.
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let tau = self
            .model
            .tau
            .ok_or_else(|| CliError::Config("missing required key model.tau".into()))?;
        ModelParams::new(tau, self.model.lambda, self.model.mu)
            .map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn domain(&self) -> Result<DomainKind, CliError> {
        let multidim = self.multidim.as_ref().expect("multidim config present");
        match multidim.domain {
            DomainName::Hypercube => DomainKind::hypercube(multidim.dim)
                .map_err(|e| CliError::Config(format!("multidim.dim: {e}"))),
            DomainName::UnitDisk => Ok(DomainKind::UnitDisk),
        }
    }
}

fn range_check(name: &str, value: f64, lo: f64, hi: f64) -> Result<(), CliError> {
    if value > lo && value < hi {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} = {value} out of range ({lo}, {hi})"
        )))
    }
}

fn require<T>(section: Option<T>, name: &str, kind: &str) -> Result<T, CliError> {
    section.ok_or_else(|| {
        CliError::Config(format!("experiment \"{kind}\" requires a [{name}] section"))
    })
}

fn forbid_unused(config: &RawConfig) -> Result<(), CliError> {
    use ExperimentKind::*;
    let kind = config.experiment;
    // [pde] doubles as the solver settings for critical-tau.
    let allowed: &[(&str, bool)] = &[
        ("simulate", config.simulate.is_some() && kind != Simulate),
        ("sweep", config.sweep.is_some() && kind != Sweep),
        (
            "pde",
            config.pde.is_some() && !matches!(kind, Pde | CriticalTau),
        ),
        (
            "critical_tau",
            config.critical_tau.is_some() && kind != CriticalTau,
        ),
        (
            "force_check",
            config.force_check.is_some() && kind != ForceCheck,
        ),
        (
            "martingale",
            config.martingale.is_some() && kind != Martingale,
        ),
        ("multidim", config.multidim.is_some() && kind != Multidim),
        (
            "rule_check",
            config.rule_check.is_some() && kind != RuleCheck,
        ),
    ];
    for (name, stray) in allowed {
        if *stray {
            return Err(CliError::Config(format!(
                "section [{name}] does not belong to experiment \"{}\"",
                kind_name(kind)
            )));
        }
    }
    Ok(())
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Simulate => "simulate",
        ExperimentKind::Sweep => "sweep",
        ExperimentKind::Pde => "pde",
        ExperimentKind::CriticalTau => "critical-tau",
        ExperimentKind::ForceCheck => "force-check",
        ExperimentKind::Martingale => "martingale",
        ExperimentKind::Multidim => "multidim",
        ExperimentKind::RuleCheck => "rule-check",
    }
}

/// Parses and validates a config document. Unknown keys, missing required
/// keys and out-of-range values are all reported with their key path (the
/// TOML layer includes line/column positions).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    forbid_unused(&raw)?;

    let model = raw
        .model
        .ok_or_else(|| CliError::Config("missing required section [model]".into()))?;
    range_check("model.lambda", model.lambda, 0.0, 1.0)?;
    range_check("model.mu", model.mu, 0.0, 1.0)?;
    let kind = raw.experiment;

    // Experiments on the unit interval need tau in (0,1); the geometric
    // extension admits thresholds up to the domain diameter.
    if let Some(tau) = model.tau {
        if kind == ExperimentKind::Multidim {
            let dim = raw.multidim.as_ref().and_then(|m| m.dim).unwrap_or(2);
            let diameter = match raw.multidim.as_ref().map(|m| m.domain) {
                Some(DomainName::UnitDisk) => 2.0,
                _ => (dim.max(1) as f64).sqrt(),
            };
            range_check("model.tau", tau, 0.0, diameter)?;
        } else {
            range_check("model.tau", tau, 0.0, 1.0)?;
        }
    }
    let need_tau = !matches!(kind, ExperimentKind::Sweep | ExperimentKind::CriticalTau);
    if need_tau && model.tau.is_none() {
        return Err(CliError::Config("missing required key model.tau".into()));
    }

    let mut config = ExperimentConfig {
        experiment: kind,
        seed: raw.seed,
        output_dir: raw.output_dir.unwrap_or_else(|| ".".into()),
        workers: raw.workers,
        model: ModelSection {
            tau: model.tau,
            lambda: model.lambda,
            mu: model.mu,
        },
        simulate: None,
        sweep: None,
        pde: None,
        critical_tau: None,
        force_check: None,
        martingale: None,
        multidim: None,
        rule_check: None,
    };

    match kind {
        ExperimentKind::Simulate => {
            let raw = require(raw.simulate, "simulate", "simulate")?;
            if raw.n < 2 {
                return Err(CliError::Config(format!(
                    "simulate.n = {} must be at least 2",
                    raw.n
                )));
            }
            let scheduler = raw.scheduler.unwrap_or(SchedulerName::UniformPair);
            let max_steps = raw.max_steps.unwrap_or(default_max_steps(scheduler));
            let tau = config.model.tau.expect("checked above");
            let epsilon = raw
                .epsilon
                .unwrap_or_else(|| polarlab_core::engine::absorbing_epsilon(tau));
            range_check("simulate.epsilon", epsilon, 0.0, 0.5)?;
            config.simulate = Some(SimulateConfig {
                n: raw.n,
                scheduler,
                max_steps,
                epsilon,
                snapshot_every: raw.snapshot_every.unwrap_or((max_steps / 1000).max(1)),
            });
        }
        ExperimentKind::Sweep => {
            let raw = require(raw.sweep, "sweep", "sweep")?;
            if raw.tau_grid.is_empty() || raw.n_list.is_empty() {
                return Err(CliError::Config(
                    "sweep.tau_grid and sweep.n_list must be non-empty".into(),
                ));
            }
            for &tau in &raw.tau_grid {
                range_check("sweep.tau_grid", tau, 0.0, 1.0)?;
            }
            if raw.runs == 0 {
                return Err(CliError::Config("sweep.runs must be at least 1".into()));
            }
            let scheduler = raw.scheduler.unwrap_or(SchedulerName::UniformPair);
            if scheduler == SchedulerName::RandomMatching {
                if let Some(n) = raw.n_list.iter().find(|n| *n % 2 != 0) {
                    return Err(CliError::Config(format!(
                        "sweep.n_list: random matching requires even n, got {n}"
                    )));
                }
            }
            config.sweep = Some(SweepConfig {
                tau_grid: raw.tau_grid,
                n_list: raw.n_list,
                runs: raw.runs,
                scheduler,
                max_steps: raw.max_steps.unwrap_or(default_max_steps(scheduler)),
            });
        }
        ExperimentKind::Pde | ExperimentKind::CriticalTau => {
            let raw_pde = raw.pde.unwrap_or(RawPde {
                grid_size: None,
                dt: None,
                t_max: None,
                snapshot_times: None,
                classify_window: None,
                classify_mass: None,
            });
            let pde = PdeConfig {
                grid_size: raw_pde.grid_size.unwrap_or(400),
                dt: raw_pde.dt.unwrap_or(1.0),
                t_max: raw_pde.t_max.unwrap_or(400.0),
                snapshot_times: raw_pde
                    .snapshot_times
                    .unwrap_or_else(|| vec![0.0, 10.0, 20.0]),
                classify_window: raw_pde.classify_window.unwrap_or(0.05),
                classify_mass: raw_pde.classify_mass.unwrap_or(0.95),
            };
            if pde.grid_size < 50 {
                return Err(CliError::Config(format!(
                    "pde.grid_size = {} must be at least 50",
                    pde.grid_size
                )));
            }
            if pde.dt.is_nan() || pde.dt <= 0.0 {
                return Err(CliError::Config(format!(
                    "pde.dt = {} must be positive",
                    pde.dt
                )));
            }
            for &t in &pde.snapshot_times {
                if t < 0.0 || t > pde.t_max {
                    return Err(CliError::Config(format!(
                        "pde.snapshot_times entry {t} outside [0, t_max = {}]",
                        pde.t_max
                    )));
                }
            }
            range_check("pde.classify_mass", pde.classify_mass, 0.0, 1.0)?;
            config.pde = Some(pde);
            if kind == ExperimentKind::CriticalTau {
                let raw = require(raw.critical_tau, "critical_tau", "critical-tau")?;
                range_check("critical_tau.lo", raw.lo, 0.0, 1.0)?;
                range_check("critical_tau.hi", raw.hi, 0.0, 1.0)?;
                if raw.lo >= raw.hi {
                    return Err(CliError::Config(format!(
                        "critical_tau: lo = {} must be below hi = {}",
                        raw.lo, raw.hi
                    )));
                }
                if raw.tol.is_nan() || raw.tol <= 0.0 {
                    return Err(CliError::Config(format!(
                        "critical_tau.tol = {} must be positive",
                        raw.tol
                    )));
                }
                config.critical_tau = Some(CriticalTauConfig {
                    lo: raw.lo,
                    hi: raw.hi,
                    tol: raw.tol,
                });
            }
        }
        ExperimentKind::ForceCheck => {
            let raw = require(raw.force_check, "force_check", "force-check")?;
            if raw.n < 2 {
                return Err(CliError::Config(format!(
                    "force_check.n = {} must be at least 2",
                    raw.n
                )));
            }
            if raw.trials == 0 {
                return Err(CliError::Config("force_check.trials must be >= 1".into()));
            }
            let tau = config.model.tau.expect("checked above");
            let admissible = (tau / 2.0).min((1.0 - tau) / 2.0);
            let epsilon = raw
                .epsilon
                .unwrap_or_else(|| polarlab_core::engine::absorbing_epsilon(tau));
            range_check("force_check.epsilon", epsilon, 0.0, admissible)?;
            config.force_check = Some(ForceCheckConfig {
                n: raw.n,
                trials: raw.trials,
                epsilon,
            });
        }
        ExperimentKind::Martingale => {
            let raw = require(raw.martingale, "martingale", "martingale")?;
            if raw.n < 2 {
                return Err(CliError::Config(format!(
                    "martingale.n = {} must be at least 2",
                    raw.n
                )));
            }
            if raw.budget == 0 {
                return Err(CliError::Config("martingale.budget must be >= 1".into()));
            }
            config.martingale = Some(MartingaleConfig {
                n: raw.n,
                budget: raw.budget,
            });
        }
        ExperimentKind::Multidim => {
            let raw = require(raw.multidim, "multidim", "multidim")?;
            if raw.n < 2 {
                return Err(CliError::Config(format!(
                    "multidim.n = {} must be at least 2",
                    raw.n
                )));
            }
            let dim = raw.dim.unwrap_or(2);
            if raw.domain == DomainName::UnitDisk && dim != 2 {
                return Err(CliError::Config(format!(
                    "multidim.dim = {dim}: the unit disk is only defined in dimension 2"
                )));
            }
            if dim == 0 {
                return Err(CliError::Config("multidim.dim must be at least 1".into()));
            }
            let tau = config.model.tau.expect("checked above");
            let scheduler = raw.scheduler.unwrap_or(SchedulerName::RandomMatching);
            if scheduler == SchedulerName::RandomMatching && raw.n % 2 != 0 {
                return Err(CliError::Config(format!(
                    "multidim.n = {}: random matching requires an even population",
                    raw.n
                )));
            }
            let max_rounds = raw.max_rounds.unwrap_or(10_000);
            config.multidim = Some(MultidimConfig {
                n: raw.n,
                domain: raw.domain,
                dim,
                scheduler,
                epsilon: raw.epsilon.unwrap_or((tau / 2.0).min(0.05)),
                max_rounds,
                snapshot_every: raw.snapshot_every.unwrap_or((max_rounds / 50).max(1)),
            });
        }
        ExperimentKind::RuleCheck => {
            let raw = require(raw.rule_check, "rule_check", "rule-check")?;
            if raw.samples == 0 {
                return Err(CliError::Config("rule_check.samples must be >= 1".into()));
            }
            config.rule_check = Some(RuleCheckConfig {
                rule: raw.rule,
                samples: raw.samples,
            });
        }
    }

    Ok(config)
}

fn default_max_steps(scheduler: SchedulerName) -> u64 {
    match scheduler {
        SchedulerName::UniformPair => polarlab_core::engine::DEFAULT_MAX_STEPS_UNIFORM,
        SchedulerName::RandomMatching => polarlab_core::engine::DEFAULT_MAX_ROUNDS_MATCHING,
    }
}
