//! Opinions, model parameters and the pairwise interaction rules.
//!
//! An interaction rule is a symmetric pair map `f = (f1, f2)` on `[0,1]²`
//! with `f1(x, y) = f2(y, x)`, so the outcome of an encounter does not
//! depend on the order in which the two agents are listed. Two concrete
//! rules are provided: the classical bounded-confidence rule (attraction
//! only) and the attraction-repulsion rule, where pairs farther apart than
//! the tolerance threshold are pushed towards the extremes.

use serde::Serialize;
use thiserror::Error;

/// Numerical slack allowed when clamping rule outputs back into `[0,1]`.
/// Anything beyond this is a rule bug and is reported by the contract
/// checker rather than silently repaired.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("opinion value {0} lies outside [0,1]")]
    OpinionOutOfRange(f64),
    #[error("parameter {name} = {value} must lie in (0,1)")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("parameter {name} = {value} must lie in (0,{limit})")]
    TauOutOfRange {
        name: &'static str,
        value: f64,
        limit: f64,
    },
}

/// A scalar opinion, confined to the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Opinion(f64);

impl Opinion {
    /// Validates the value, accepting roundoff up to [`CLAMP_TOLERANCE`]
    /// outside the interval.
    pub fn new(value: f64) -> Result<Self, KernelError> {
        if (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&value) {
            Ok(Opinion(value.clamp(0.0, 1.0)))
        } else {
            Err(KernelError::OpinionOutOfRange(value))
        }
    }

    /// Clamps into `[0,1]` unconditionally. Used for rule outputs whose
    /// formulas are range-closed up to floating-point rounding.
    #[inline]
    pub(crate) fn clamped(value: f64) -> Self {
        Opinion(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The parameter triple `(τ, λ, μ)` plus the derived `ν = λ/2`.
///
/// `τ` is the tolerance threshold separating attraction from repulsion,
/// `λ` the attraction strength and `μ` the repulsion strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    tau: f64,
    lambda: f64,
    mu: f64,
}

impl ModelParams {
    /// Validated constructor for the one-dimensional model: all three
    /// parameters must lie strictly in `(0,1)`.
    pub fn new(tau: f64, lambda: f64, mu: f64) -> Result<Self, KernelError> {
        Self::with_tau_limit(tau, lambda, mu, 1.0)
    }

    /// Like [`ModelParams::new`] but with `τ ∈ (0, tau_limit)`. The
    /// geometric extensions admit thresholds up to the domain diameter
    /// (e.g. `τ = 1` on the unit square, whose diameter is `√2`).
    pub fn with_tau_limit(
        tau: f64,
        lambda: f64,
        mu: f64,
        tau_limit: f64,
    ) -> Result<Self, KernelError> {
        if !(tau > 0.0 && tau < tau_limit) {
            return Err(KernelError::TauOutOfRange {
                name: "tau",
                value: tau,
                limit: tau_limit,
            });
        }
        for (name, value) in [("lambda", lambda), ("mu", mu)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(KernelError::ParamOutOfRange { name, value });
            }
        }
        Ok(ModelParams { tau, lambda, mu })
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Derived attraction half-strength `ν = λ/2`.
    #[inline]
    pub fn nu(&self) -> f64 {
        self.lambda / 2.0
    }
}

/// A symmetric pair map taking the two current opinions to the two updated
/// ones. Implementations must be deterministic, total on `[0,1]²` and
/// order-invariant: `apply(x, y) = swap(apply(y, x))`.
pub trait InteractionRule {
    fn apply(&self, x: Opinion, y: Opinion) -> (Opinion, Opinion);
}

/// Bounded-confidence rule: pairs within `τ` of each other move together
/// by `λ/2` of their gap; farther pairs do not interact at all.
#[derive(Debug, Clone, Copy)]
pub struct BoundedConfidence {
    params: ModelParams,
}

impl BoundedConfidence {
    pub fn new(params: ModelParams) -> Self {
        BoundedConfidence { params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

impl InteractionRule for BoundedConfidence {
    fn apply(&self, x: Opinion, y: Opinion) -> (Opinion, Opinion) {
        ordered_apply(x, y, |lo, hi| {
            let gap = hi - lo;
            if gap <= self.params.tau {
                let shift = self.params.nu() * gap;
                (lo + shift, hi - shift)
            } else {
                (lo, hi)
            }
        })
    }
}

/// Attraction-repulsion rule: pairs within `τ` contract their gap by a
/// factor `1-λ`; pairs farther than `τ` are each pushed towards their
/// nearer extreme, shrinking the distance to that extreme by `1-μ`.
///
/// The boundary tie `|x-y| = τ` takes the attraction branch.
#[derive(Debug, Clone, Copy)]
pub struct AttractionRepulsion {
    params: ModelParams,
}

impl AttractionRepulsion {
    pub fn new(params: ModelParams) -> Self {
        AttractionRepulsion { params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

impl InteractionRule for AttractionRepulsion {
    fn apply(&self, x: Opinion, y: Opinion) -> (Opinion, Opinion) {
        ordered_apply(x, y, |lo, hi| {
            let gap = hi - lo;
            if gap <= self.params.tau {
                let shift = self.params.nu() * gap;
                (lo + shift, hi - shift)
            } else {
                let keep = 1.0 - self.params.mu;
                (keep * lo, 1.0 - keep * (1.0 - hi))
            }
        })
    }
}

/// Normalizes the pair so `map` sees `lo <= hi`, then restores the original
/// order. Callers never pre-sort, and order invariance holds exactly (the
/// same floating-point expressions are evaluated either way).
#[inline]
fn ordered_apply(
    x: Opinion,
    y: Opinion,
    map: impl Fn(f64, f64) -> (f64, f64),
) -> (Opinion, Opinion) {
    let (a, b) = if x.0 <= y.0 {
        map(x.0, y.0)
    } else {
        let (a, b) = map(y.0, x.0);
        (b, a)
    };
    debug_assert!(
        (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&a),
        "rule output {a} escapes [0,1] beyond tolerance"
    );
    debug_assert!(
        (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&b),
        "rule output {b} escapes [0,1] beyond tolerance"
    );
    (Opinion::clamped(a), Opinion::clamped(b))
}

/// One contract violation found while sampling a rule.
#[derive(Debug, Clone, Serialize)]
pub struct ContractViolation {
    pub x: f64,
    pub y: f64,
    pub reason: String,
}

/// Result of sampling a rule against the attraction-repulsion cleavage
/// conditions: order invariance, containment/exclusion per branch, strict
/// contraction below the threshold, strict expansion above it, and fixed
/// points only at gaps 0 and 1.
///
/// The worst ratios are empirical candidates for the contraction constant
/// (`< 1` required) and the expansion constant (`> 1` required). The
/// expansion ratio is measured over gaps in `(τ, 1)` only: the extreme
/// pair at gap 1 is a fixed point and is excluded.
#[derive(Debug, Clone, Serialize)]
pub struct RuleContractReport {
    pub order_invariance_ok: bool,
    pub attraction_ok: bool,
    pub repulsion_ok: bool,
    pub fixed_points_ok: bool,
    pub worst_attraction_ratio: f64,
    pub worst_repulsion_ratio: f64,
    pub violations: Vec<ContractViolation>,
}

impl RuleContractReport {
    pub fn all_ok(&self) -> bool {
        self.order_invariance_ok && self.attraction_ok && self.repulsion_ok && self.fixed_points_ok
    }
}

/// Samples `(x, y)` pairs (a uniform product grid, uniform random points,
/// and a hand-picked set of boundary and near-threshold pairs) and checks
/// each against the cleavage conditions for the given threshold `τ`.
pub fn check_rule_contract<R: InteractionRule>(
    rule: &R,
    tau: f64,
    sample_count: usize,
    seed: u64,
) -> RuleContractReport {
    use rand::{Rng, SeedableRng};

    let sample_count = sample_count.max(1);
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(sample_count + 32);

    // Product grid over roughly half the budget.
    let side = (((sample_count / 2) as f64).sqrt().floor() as usize).max(2);
    for i in 0..side {
        for j in 0..side {
            let x = i as f64 / (side - 1) as f64;
            let y = j as f64 / (side - 1) as f64;
            pairs.push((x, y));
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    while pairs.len() < sample_count {
        pairs.push((rng.gen::<f64>(), rng.gen::<f64>()));
    }

    // Boundary pairs, zero-gap pairs, and pairs straddling the threshold.
    let specials: &[(f64, f64)] = &[
        (0.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (1.0, 0.0),
        (0.5, 0.5),
        (0.0, tau),
        (0.0, (tau + 1e-9).min(1.0)),
        (0.0, (tau - 1e-9).max(0.0)),
        (0.25, (0.25 + tau).min(1.0)),
        ((1.0 - tau).max(0.0), 1.0),
        (0.5 - tau / 2.0, 0.5 + tau / 2.0),
    ];
    pairs.extend_from_slice(specials);

    let mut report = RuleContractReport {
        order_invariance_ok: true,
        attraction_ok: true,
        repulsion_ok: true,
        fixed_points_ok: true,
        worst_attraction_ratio: 0.0,
        worst_repulsion_ratio: f64::INFINITY,
        violations: Vec::new(),
    };

    let violate = |report: &mut RuleContractReport, x: f64, y: f64, reason: String| {
        report.violations.push(ContractViolation { x, y, reason });
    };

    for &(x, y) in &pairs {
        let (ox, oy) = (Opinion::clamped(x), Opinion::clamped(y));
        let (x1, y1) = rule.apply(ox, oy);
        let (y2, x2) = rule.apply(oy, ox);

        if x1 != x2 || y1 != y2 {
            report.order_invariance_ok = false;
            violate(&mut report, x, y, "order invariance broken".into());
        }

        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let gap = hi - lo;
        let new_gap = (y1.value() - x1.value()).abs();
        let out_lo = x1.value().min(y1.value());
        let out_hi = x1.value().max(y1.value());

        let fixed = (x1.value() - x).abs() <= 1e-15 && (y1.value() - y).abs() <= 1e-15;
        let gap_trivial = gap <= CLAMP_TOLERANCE || (1.0 - gap).abs() <= CLAMP_TOLERANCE;
        if fixed && !gap_trivial {
            report.fixed_points_ok = false;
            violate(
                &mut report,
                x,
                y,
                format!("fixed point at gap {gap} (only gaps 0 and 1 admitted)"),
            );
        }
        if !fixed && gap_trivial {
            report.fixed_points_ok = false;
            violate(
                &mut report,
                x,
                y,
                format!("gap {gap} must be a fixed point but moved"),
            );
        }

        if gap <= tau {
            // Attraction branch: outputs inside [lo, hi], gap strictly contracted.
            if out_lo < lo - CLAMP_TOLERANCE || out_hi > hi + CLAMP_TOLERANCE {
                report.attraction_ok = false;
                violate(&mut report, x, y, "attraction output escapes [x,y]".into());
            }
            if gap > CLAMP_TOLERANCE {
                let ratio = new_gap / gap;
                report.worst_attraction_ratio = report.worst_attraction_ratio.max(ratio);
                if ratio >= 1.0 {
                    report.attraction_ok = false;
                    violate(
                        &mut report,
                        x,
                        y,
                        format!("attraction ratio {ratio} is not < 1"),
                    );
                }
            }
        } else {
            // Repulsion branch: outputs outside (lo, hi), gap strictly expanded
            // for gaps below 1.
            if out_lo > lo + CLAMP_TOLERANCE || out_hi < hi - CLAMP_TOLERANCE {
                report.repulsion_ok = false;
                violate(
                    &mut report,
                    x,
                    y,
                    "repulsion output falls inside (x,y)".into(),
                );
            }
            if gap < 1.0 - CLAMP_TOLERANCE {
                let ratio = new_gap / gap;
                report.worst_repulsion_ratio = report.worst_repulsion_ratio.min(ratio);
                if ratio <= 1.0 {
                    report.repulsion_ok = false;
                    violate(
                        &mut report,
                        x,
                        y,
                        format!("repulsion ratio {ratio} is not > 1"),
                    );
                }
            }
        }
    }

    if report.worst_repulsion_ratio == f64::INFINITY {
        report.worst_repulsion_ratio = f64::NAN;
    }
    report
}
