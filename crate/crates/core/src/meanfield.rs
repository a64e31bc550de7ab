//! Forward-Euler integration of the infinite-population density equation.
//!
//! Under the random-matching dynamic every agent is updated once per round,
//! and as the population grows the empirical opinion distribution follows a
//! deterministic master equation: the density gains mass at `x` from
//! attracting pairs whose mover lands on `x`, from repelled movers arriving
//! from either side, and loses the mass currently at `x` (every encounter
//! moves the agent). With a unit time step the Euler update is exactly the
//! one-round pushforward of the matching dynamic, which keeps the scheme
//! positive and mass-conserving up to quadrature error.
//!
//! Off-grid density values use a piecewise-constant (nearest-node)
//! approximation. All integrals are evaluated exactly against that step
//! interpolant, i.e. by a composite midpoint rule subdivided at the
//! interpolant's breakpoints, with limits clipped to `[0,1]`. Node-sampled
//! quadrature
//! loses first-order mass once the density concentrates at the poles;
//! integrating the interpolant itself keeps the per-step mass drift second
//! order in the cell width.

use crate::kernel::ModelParams;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PdeError {
    #[error("grid must have at least 50 cells, got {0}")]
    GridTooCoarse(usize),
    #[error("density values must be nonnegative and not all zero")]
    InvalidDensity,
    #[error("dt must be positive, got {0}")]
    InvalidDt(f64),
    #[error("classification window {0} must lie in (0, min(tau/2, 1/4))")]
    InvalidWindow(f64),
    #[error("numerical instability at step {step}: |f| reached {magnitude:.3e} (reduce dt)")]
    Instability { step: u64, magnitude: f64 },
    #[error("invalid bisection bracket: lo and hi classify identically ({0:?})")]
    InvalidBracket(LimitKind),
}

/// Density samples at the nodes `x_k = k/M`, `k = 0..=M`, trapezoid-normalized
/// to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    values: Vec<f64>,
}

impl DensityGrid {
    /// The uniform density on `[0,1]`.
    pub fn uniform(grid_size: usize) -> Result<Self, PdeError> {
        Self::from_values(vec![1.0; grid_size + 1])
    }

    /// Builds a grid from raw node values (length `M+1`), normalizing the
    /// trapezoid mass to 1.
    pub fn from_values(values: Vec<f64>) -> Result<Self, PdeError> {
        if values.len() < 51 {
            return Err(PdeError::GridTooCoarse(values.len().saturating_sub(1)));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(PdeError::InvalidDensity);
        }
        let mut grid = DensityGrid { values };
        let mass = grid.mass();
        if mass <= 0.0 {
            return Err(PdeError::InvalidDensity);
        }
        for v in &mut grid.values {
            *v /= mass;
        }
        Ok(grid)
    }

    /// Number of cells `M` (the grid has `M+1` nodes).
    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.grid_size() as f64
    }

    /// Trapezoid mass over the whole interval.
    pub fn mass(&self) -> f64 {
        let m = self.grid_size() as f64;
        let sum: f64 = self.values.iter().sum();
        (sum - 0.5 * self.values[0] - 0.5 * self.values[self.grid_size()]) / m
    }

    /// Piecewise-constant (nearest-node) evaluation; zero outside `[0,1]`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let m = self.grid_size();
        let idx = (x * m as f64).round() as usize;
        self.values[idx.min(m)]
    }

    /// Mass of the step interpolant restricted to `[a,b] ∩ [0,1]`, with
    /// partial end cells. Over `[0,1]` this coincides with the trapezoid
    /// formula of [`DensityGrid::mass`].
    pub fn mass_on(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        let b = b.min(1.0);
        if b <= a {
            return 0.0;
        }
        let m = self.grid_size();
        let h = 1.0 / m as f64;
        // Node k owns the cell [(k-1/2)h, (k+1/2)h] ∩ [0,1].
        let k_lo = ((a * m as f64 + 0.5).floor() as usize).min(m);
        let k_hi = ((b * m as f64 + 0.5).floor() as usize).min(m);
        let mut sum = 0.0;
        for k in k_lo..=k_hi {
            let left = ((k as f64 - 0.5) * h).max(0.0).max(a);
            let right = ((k as f64 + 0.5) * h).min(1.0).min(b);
            if right > left {
                sum += self.values[k] * (right - left);
            }
        }
        sum
    }

    /// Max over nodes of `|f(x) - f(1-x)|`.
    pub fn symmetry_error(&self) -> f64 {
        let m = self.grid_size();
        (0..=m)
            .map(|k| (self.values[k] - self.values[m - k]).abs())
            .fold(0.0, f64::max)
    }
}

/// First and second cumulative integrals of the step interpolant:
/// `F(u) = ∫_0^u f̃` (piecewise linear) and `G(u) = ∫_0^u F` (piecewise
/// quadratic), both exact. They turn every influx cell-average into a
/// closed form.
struct Cumulative {
    /// Mass up to the left edge of each cell, plus a final total entry.
    cum: Vec<f64>,
    /// ∫_0^{left edge} F for each cell, plus the value at 1.
    gum: Vec<f64>,
    values: Vec<f64>,
    m: usize,
}

impl Cumulative {
    fn new(grid: &DensityGrid) -> Self {
        let m = grid.grid_size();
        let values = grid.values().to_vec();
        let mut cum = Vec::with_capacity(m + 2);
        let mut gum = Vec::with_capacity(m + 2);
        cum.push(0.0);
        gum.push(0.0);
        for k in 0..=m {
            let (l, r) = cell_bounds(k, m);
            let w = r - l;
            let c = cum[k];
            cum.push(c + values[k] * w);
            gum.push(gum[k] + c * w + 0.5 * values[k] * w * w);
        }
        Cumulative {
            cum,
            gum,
            values,
            m,
        }
    }

    fn mass(&self) -> f64 {
        self.cum[self.m + 1]
    }

    /// Index of the cell containing `u` (clamped).
    #[inline]
    fn cell_of(&self, u: f64) -> usize {
        ((u * self.m as f64 + 0.5).floor() as usize).min(self.m)
    }

    /// `F(u) = ∫_0^u f̃`, extended constant outside `[0,1]`.
    #[inline]
    fn f(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.mass();
        }
        let k = self.cell_of(u);
        let (l, _) = cell_bounds(k, self.m);
        self.cum[k] + self.values[k] * (u - l)
    }

    /// `G(u) = ∫_0^u F`, extended linearly outside `[0,1]`.
    #[inline]
    fn g(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.gum[self.m + 1] + self.mass() * (u - 1.0);
        }
        let k = self.cell_of(u);
        let (l, _) = cell_bounds(k, self.m);
        let d = u - l;
        self.gum[k] + self.cum[k] * d + 0.5 * self.values[k] * d * d
    }

    /// `∫_{y0}^{y1} F(c + s·y) dy`, exact.
    #[inline]
    fn integral_of_f_along(&self, c: f64, s: f64, y0: f64, y1: f64) -> f64 {
        if s == 0.0 {
            self.f(c) * (y1 - y0)
        } else {
            (self.g(c + s * y1) - self.g(c + s * y0)) / s
        }
    }
}

/// Cell of node `k`: `[(k-1/2)h, (k+1/2)h] ∩ [0,1]`.
#[inline]
fn cell_bounds(k: usize, m: usize) -> (f64, f64) {
    let h = 1.0 / m as f64;
    (
        ((k as f64 - 0.5) * h).max(0.0),
        ((k as f64 + 0.5) * h).min(1.0),
    )
}

/// A linear bound `c + s·y` used in the attraction window.
#[derive(Clone, Copy)]
struct Line {
    c: f64,
    s: f64,
}

impl Line {
    #[inline]
    fn at(&self, y: f64) -> f64 {
        self.c + self.s * y
    }
}

/// Exact cell averages of the influx operator: for each cell, the mean of
/// the attraction and repulsion arrival densities over that cell. Because
/// the averages integrate the step interpolant exactly, the total influx
/// mass equals the squared density mass and the Euler update conserves
/// mass to rounding. Pointwise node sampling instead loses first-order
/// mass once the density concentrates into near-singular spikes.
fn influx_cell_averages(grid: &DensityGrid, params: &PdeParams) -> Vec<f64> {
    let m = grid.grid_size();
    let tau = params.model.tau();
    let nu = params.model.nu();
    let mu = params.model.mu();
    let one_minus_nu = 1.0 - nu;
    let one_minus_mu = 1.0 - mu;
    let cumulative = Cumulative::new(grid);

    (0..=m)
        .into_par_iter()
        .map(|k| {
            let (l, r) = cell_bounds(k, m);
            let width = r - l;

            // Attraction: substituting the mover origin z = (x-νy)/(1-ν)
            // turns the cell integral into ∫ f̃(y)·[F(B(y)) - F(A(y))] dy
            // with A = max(0, y-τ, (l-νy)/(1-ν)), B = min(1, y+τ, (r-νy)/(1-ν)).
            let a_lines = [
                Line { c: 0.0, s: 0.0 },
                Line { c: -tau, s: 1.0 },
                Line {
                    c: l / one_minus_nu,
                    s: -nu / one_minus_nu,
                },
            ];
            let b_lines = [
                Line { c: 1.0, s: 0.0 },
                Line { c: tau, s: 1.0 },
                Line {
                    c: r / one_minus_nu,
                    s: -nu / one_minus_nu,
                },
            ];

            // Cuts where the active branch of A or B can change, or where
            // the window B-A can close: all pairwise intersections.
            let mut cuts: Vec<f64> = Vec::with_capacity(24);
            let mut cross = |p: Line, q: Line| {
                if p.s != q.s {
                    let y = (q.c - p.c) / (p.s - q.s);
                    if y > 0.0 && y < 1.0 {
                        cuts.push(y);
                    }
                }
            };
            for &p in &a_lines {
                for &q in &a_lines {
                    cross(p, q);
                }
            }
            for &p in &b_lines {
                for &q in &b_lines {
                    cross(p, q);
                }
            }
            for &p in &a_lines {
                for &q in &b_lines {
                    cross(p, q);
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

            let mut attraction = 0.0;
            for j in 0..=m {
                let (yl, yr) = cell_bounds(j, m);
                let fy = cumulative.values[j];
                if fy == 0.0 {
                    continue;
                }
                // Subdivide the cell at the branch-switch cuts inside it.
                let mut start = yl;
                let first = cuts.partition_point(|&c| c <= yl);
                for &c in &cuts[first..] {
                    if c >= yr {
                        break;
                    }
                    attraction += fy * window_integral(&cumulative, &a_lines, &b_lines, start, c);
                    start = c;
                }
                attraction += fy * window_integral(&cumulative, &a_lines, &b_lines, start, yr);
            }

            // Repulsion towards 0: movers at z = (x-μ)/(1-μ) with partner
            // mass F(z-τ); the Jacobian cancels the 1/(1-μ) prefactor.
            let mut repulsion = 0.0;
            {
                let z0 = ((l - mu) / one_minus_mu).max(0.0);
                let z1 = ((r - mu) / one_minus_mu).min(1.0);
                for (j, lo, hi) in cells_overlapping(z0, z1, m) {
                    repulsion +=
                        cumulative.values[j] * (cumulative.g(hi - tau) - cumulative.g(lo - tau));
                }
            }
            // Repulsion towards 1: movers at z = x/(1-μ) with partner mass
            // above z+τ.
            {
                let z0 = (l / one_minus_mu).max(0.0);
                let z1 = (r / one_minus_mu).min(1.0);
                let total = cumulative.mass();
                for (j, lo, hi) in cells_overlapping(z0, z1, m) {
                    repulsion += cumulative.values[j]
                        * (total * (hi - lo) - (cumulative.g(hi + tau) - cumulative.g(lo + tau)));
                }
            }

            (attraction + repulsion) / width
        })
        .collect()
}

/// The cells intersecting `[z0,z1] ∩ [0,1]` with their clipped overlap,
/// as `(index, lo, hi)` triples with `hi > lo`.
fn cells_overlapping(z0: f64, z1: f64, m: usize) -> impl Iterator<Item = (usize, f64, f64)> {
    let z0 = z0.max(0.0);
    let z1 = z1.min(1.0);
    let j_lo = if z1 > z0 {
        ((z0 * m as f64 + 0.5).floor() as usize).min(m)
    } else {
        1
    };
    let j_hi = if z1 > z0 {
        ((z1 * m as f64 + 0.5).floor() as usize).min(m)
    } else {
        0
    };
    (j_lo..=j_hi).filter_map(move |j| {
        let (cl, cr) = cell_bounds(j, m);
        let lo = cl.max(z0);
        let hi = cr.min(z1);
        (hi > lo).then_some((j, lo, hi))
    })
}

/// `∫_{y0}^{y1} [F(B(y)) - F(A(y))]⁺ dy` where A and B are the max/min of
/// their line families and no branch switch occurs inside the interval.
#[inline]
fn window_integral(
    cumulative: &Cumulative,
    a_lines: &[Line; 3],
    b_lines: &[Line; 3],
    y0: f64,
    y1: f64,
) -> f64 {
    if y1 <= y0 {
        return 0.0;
    }
    let mid = 0.5 * (y0 + y1);
    let a = a_lines
        .iter()
        .copied()
        .max_by(|p, q| p.at(mid).partial_cmp(&q.at(mid)).unwrap())
        .unwrap();
    let b = b_lines
        .iter()
        .copied()
        .min_by(|p, q| p.at(mid).partial_cmp(&q.at(mid)).unwrap())
        .unwrap();
    if b.at(mid) <= a.at(mid) {
        return 0.0;
    }
    cumulative.integral_of_f_along(b.c, b.s, y0, y1)
        - cumulative.integral_of_f_along(a.c, a.s, y0, y1)
}

/// Exact integral of `y ↦ f((x-νy)/(1-ν))·f(y)` over `[a,b] ∩ [0,1]` under
/// the step interpretation of `f`: the range is cut at every cell boundary
/// of both factors, and each constant piece is valued at its midpoint.
fn step_product_integral(grid: &DensityGrid, x: f64, a: f64, b: f64, nu: f64) -> f64 {
    let a = a.max(0.0);
    let b = b.min(1.0);
    if b <= a {
        return 0.0;
    }
    let m = grid.grid_size() as f64;
    let h = 1.0 / m;
    let one_minus_nu = 1.0 - nu;

    let mut cuts: Vec<f64> = Vec::with_capacity(16 + ((b - a) / h) as usize * 2);
    cuts.push(a);
    cuts.push(b);

    // Cell boundaries of the second factor: y = (k + 1/2)h.
    let mut k = (a * m - 0.5).floor() + 1.0;
    loop {
        let y = (k + 0.5) * h;
        if y >= b {
            break;
        }
        if y > a {
            cuts.push(y);
        }
        k += 1.0;
    }

    // Cell boundaries of the first factor: (x - νy)/(1-ν) = (i + 1/2)h,
    // i.e. y = (x - (1-ν)(i + 1/2)h)/ν. z is decreasing in y.
    let z_at = |y: f64| (x - nu * y) / one_minus_nu;
    let i_lo = (z_at(b) * m - 0.5).floor() + 1.0;
    let i_hi = (z_at(a) * m - 0.5).floor();
    let mut i = i_lo;
    while i <= i_hi {
        let y = (x - one_minus_nu * (i + 0.5) * h) / nu;
        if y > a && y < b {
            cuts.push(y);
        }
        i += 1.0;
    }

    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        sum += grid.eval(z_at(mid)) * grid.eval(mid) * width;
    }
    sum
}

/// Parameters of the density solver.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PdeParams {
    pub model: ModelParams,
    /// Euler step; 1.0 makes the update the exact one-round pushforward.
    pub dt: f64,
    /// Number of grid cells `M`.
    pub grid_size: usize,
    /// Integration horizon in time units.
    pub t_max: f64,
    /// Half-width of the pole/center windows used for limit classification.
    pub classify_window: f64,
    /// Mass threshold a window must capture to classify.
    pub classify_mass: f64,
}

impl PdeParams {
    pub fn new(model: ModelParams) -> Self {
        PdeParams {
            model,
            dt: 1.0,
            grid_size: 400,
            t_max: 400.0,
            classify_window: 0.05,
            classify_mass: 0.95,
        }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        if self.grid_size < 50 {
            return Err(PdeError::GridTooCoarse(self.grid_size));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(PdeError::InvalidDt(self.dt));
        }
        let limit = (self.model.tau() / 2.0).min(0.25);
        if !(self.classify_window > 0.0 && self.classify_window < limit) {
            return Err(PdeError::InvalidWindow(self.classify_window));
        }
        Ok(())
    }
}

/// Long-time limit classification by mass concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitClass {
    pub kind: LimitKind,
    /// Mass in `[0,w] ∪ [1-w,1]`.
    pub pole_mass: f64,
    /// Mass in `[1/2-w, 1/2+w]`.
    pub center_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitKind {
    PolarizedDensity,
    ConsensusDensity,
    Undecided,
}

/// Classifies a density by where its mass concentrates.
pub fn classify_density(grid: &DensityGrid, params: &PdeParams) -> LimitClass {
    let w = params.classify_window;
    let pole_mass = grid.mass_on(0.0, w) + grid.mass_on(1.0 - w, 1.0);
    let center_mass = grid.mass_on(0.5 - w, 0.5 + w);
    let kind = if pole_mass >= params.classify_mass {
        LimitKind::PolarizedDensity
    } else if center_mass >= params.classify_mass {
        LimitKind::ConsensusDensity
    } else {
        LimitKind::Undecided
    };
    LimitClass {
        kind,
        pole_mass,
        center_mass,
    }
}

/// The right-hand side `∂f/∂t` at every grid node.
///
/// Three influx terms and one outflux:
/// attraction `(1/(1-ν)) ∫ f((x-νy)/(1-ν)) f(y) dy` over `|x-y| ≤ (1-ν)τ`,
/// repulsion towards 0 `(1/(1-μ)) f((x-μ)/(1-μ)) ∫_0^{(x-μ)/(1-μ)-τ} f`,
/// repulsion towards 1 `(1/(1-μ)) f(x/(1-μ)) ∫_{x/(1-μ)+τ}^1 f`,
/// minus `f(x)`. Empty integration ranges contribute nothing.
pub fn pde_rhs(grid: &DensityGrid, params: &PdeParams) -> Vec<f64> {
    let m = grid.grid_size();
    let tau = params.model.tau();
    let nu = params.model.nu();
    let mu = params.model.mu();
    let one_minus_nu = 1.0 - nu;
    let one_minus_mu = 1.0 - mu;

    (0..=m)
        .into_par_iter()
        .map(|k| {
            let x = k as f64 / m as f64;

            // The mover's origin (x-νy)/(1-ν) must itself lie in [0,1];
            // clip the range to that support before integrating.
            let lower = (x - one_minus_nu * tau).max((x - one_minus_nu) / nu);
            let upper = (x + one_minus_nu * tau).min(x / nu);
            let attraction = step_product_integral(grid, x, lower, upper, nu) / one_minus_nu;

            // Mover repelled towards 0: previously at (x-μ)/(1-μ), partner
            // anywhere at distance > τ below it.
            let z_down = (x - mu) / one_minus_mu;
            let repulsion_down = if z_down > 0.0 {
                grid.eval(z_down) * grid.mass_on(0.0, z_down - tau) / one_minus_mu
            } else {
                0.0
            };

            // Mover repelled towards 1: previously at x/(1-μ).
            let z_up = x / one_minus_mu;
            let repulsion_up = if z_up <= 1.0 {
                grid.eval(z_up) * grid.mass_on(z_up + tau, 1.0) / one_minus_mu
            } else {
                0.0
            };

            attraction + repulsion_down + repulsion_up - grid.values()[k]
        })
        .collect()
}

/// Bookkeeping for one Euler step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepStats {
    /// `|mass - 1|` after the update, before renormalization.
    pub mass_drift: f64,
    /// Total negative mass clipped to zero.
    pub clipped: f64,
    pub max_value: f64,
}

/// One forward-Euler step, negatives clipped, mass renormalized to 1.
/// Magnitudes of both repairs are reported.
///
/// The update uses the conservative cell-averaged form of the influx
/// operator (the nodal [`pde_rhs`] is exposed for analysis): with the
/// default `dt = 1` the new density is exactly the one-round pushforward
/// of the matching dynamic, which stays nonnegative and conserves mass to
/// rounding even after the density concentrates at the poles.
pub fn euler_step(
    grid: &DensityGrid,
    params: &PdeParams,
    step_index: u64,
) -> Result<(DensityGrid, StepStats), PdeError> {
    let influx = influx_cell_averages(grid, params);
    let mut values: Vec<f64> = grid
        .values()
        .iter()
        .zip(&influx)
        .map(|(v, influx_avg)| v + params.dt * (influx_avg - v))
        .collect();

    let max_value = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_value > 1e6 {
        return Err(PdeError::Instability {
            step: step_index,
            magnitude: max_value,
        });
    }

    let mut clipped = 0.0;
    for v in &mut values {
        if *v < 0.0 {
            clipped += -*v;
            *v = 0.0;
        }
    }

    let mut next = DensityGrid { values };
    let mass = next.mass();
    let mass_drift = (mass - 1.0).abs();
    if mass <= 0.0 {
        return Err(PdeError::Instability {
            step: step_index,
            magnitude: mass,
        });
    }
    for v in &mut next.values {
        *v /= mass;
    }

    Ok((
        next,
        StepStats {
            mass_drift,
            clipped,
            max_value,
        },
    ))
}

/// A full integration run.
#[derive(Debug, Clone)]
pub struct Evolution {
    /// `(time, density)` snapshots at the requested times (clamped to the
    /// steps actually taken). The state at `t = 0` is always included when
    /// requested.
    pub snapshots: Vec<(f64, DensityGrid)>,
    pub limit: LimitClass,
    pub steps: u64,
    pub stats: Vec<StepStats>,
    pub final_grid: DensityGrid,
}

/// Number of consecutive confirmations required before a limit
/// classification is accepted.
const CONFIRMATIONS: u32 = 5;

/// Integrates until `t_max` or until the limit classification holds for
/// five consecutive steps; an early stop still runs long enough to record
/// every requested snapshot time (times beyond `t_max` are never reached).
pub fn evolve(
    initial: &DensityGrid,
    params: &PdeParams,
    snapshot_times: &[f64],
) -> Result<Evolution, PdeError> {
    params.validate()?;
    let mut grid = initial.clone();
    let mut snapshots = Vec::new();
    let mut stats = Vec::new();
    let mut confirm: Option<(LimitKind, u32)> = None;

    let mut wanted: Vec<f64> = snapshot_times.to_vec();
    wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut next_snapshot = 0usize;

    let total_steps = (params.t_max / params.dt).ceil() as u64;
    let mut limit = classify_density(&grid, params);
    for step_index in 0..=total_steps {
        let t = step_index as f64 * params.dt;
        while next_snapshot < wanted.len() && t + 1e-9 >= wanted[next_snapshot] {
            snapshots.push((t, grid.clone()));
            next_snapshot += 1;
        }

        limit = classify_density(&grid, params);
        if limit.kind != LimitKind::Undecided {
            confirm = match confirm {
                Some((kind, count)) if kind == limit.kind => Some((kind, count + 1)),
                _ => Some((limit.kind, 1)),
            };
            let confirmed = confirm.map(|(_, c)| c).unwrap_or(0) >= CONFIRMATIONS;
            if confirmed && next_snapshot >= wanted.len() {
                return Ok(Evolution {
                    snapshots,
                    limit,
                    steps: step_index,
                    stats,
                    final_grid: grid,
                });
            }
        } else {
            confirm = None;
        }

        if step_index == total_steps {
            break;
        }
        let (next, s) = euler_step(&grid, params, step_index)?;
        stats.push(s);
        grid = next;
    }

    Ok(Evolution {
        snapshots,
        limit,
        steps: total_steps,
        stats,
        final_grid: grid,
    })
}

/// Result of the critical-threshold bisection.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalTau {
    pub tau_c: f64,
    pub iterations: u32,
    pub lo: f64,
    pub hi: f64,
}

/// Locates the threshold separating the polarizing regime from the
/// consensus regime by bisection on `τ`, classifying each midpoint by
/// evolving the uniform initial density. An endpoint that stays formally
/// `Undecided` at `t_max` is resolved by comparing pole and center mass.
pub fn find_critical_tau(
    params_base: &PdeParams,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<CriticalTau, PdeError> {
    let classify_at = |tau: f64| -> Result<LimitKind, PdeError> {
        let model = ModelParams::new(tau, params_base.model.lambda(), params_base.model.mu())
            .expect("bracket within (0,1)");
        let params = PdeParams {
            model,
            ..*params_base
        };
        let initial = DensityGrid::uniform(params.grid_size)?;
        let evolution = evolve(&initial, &params, &[])?;
        Ok(match evolution.limit.kind {
            LimitKind::Undecided => {
                if evolution.limit.pole_mass > evolution.limit.center_mass {
                    LimitKind::PolarizedDensity
                } else {
                    LimitKind::ConsensusDensity
                }
            }
            kind => kind,
        })
    };

    let lo_kind = classify_at(lo)?;
    let hi_kind = classify_at(hi)?;
    if lo_kind != LimitKind::PolarizedDensity || hi_kind != LimitKind::ConsensusDensity {
        return Err(PdeError::InvalidBracket(if lo_kind == hi_kind {
            match lo_kind {
                LimitKind::PolarizedDensity => LimitKind::PolarizedDensity,
                _ => LimitKind::ConsensusDensity,
            }
        } else {
            LimitKind::Undecided
        }));
    }

    let mut lo = lo;
    let mut hi = hi;
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if classify_at(mid)? == LimitKind::PolarizedDensity {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    Ok(CriticalTau {
        tau_c: 0.5 * (lo + hi),
        iterations,
        lo,
        hi,
    })
}
