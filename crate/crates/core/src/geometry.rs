//! D-dimensional extension of the attraction-repulsion dynamic.
//!
//! Two agents interact along the line through their positions. Pairs within
//! Euclidean distance `τ` contract towards each other exactly as in one
//! dimension; farther pairs are pushed outwards, each point shrinking its
//! distance to the intersection of the line with the domain boundary by a
//! factor `1-μ`. Supported domains are the unit hypercube in any dimension
//! and the unit disk in the plane.
//!
//! A population run stops when the per-round movement stays below ε for ten
//! consecutive rounds, then summarizes the point cloud by single-linkage
//! clusters of radius ε.

use crate::engine::{draw_matching, draw_uniform_pair};
use crate::kernel::ModelParams;
use crate::seeding::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("points must be distinct to define a line")]
    CoincidentPoints,
    #[error("point lies outside the domain")]
    PointOutsideDomain,
    #[error("dimension mismatch: point has {point}, domain wants {domain}")]
    DimensionMismatch { point: usize, domain: usize },
    #[error("the unit disk is only defined in dimension 2")]
    BadDiskDimension,
    #[error("hypercube dimension must be at least 1")]
    ZeroDimension,
    #[error("population must have at least 2 agents")]
    PopulationTooSmall,
    #[error("random matching requires an even population")]
    OddPopulation,
    #[error("epsilon must be positive")]
    InvalidEpsilon,
}

/// A position in `D` real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `self + t·(other - self)` componentwise.
    fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }
}

/// The convex domain the points live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DomainKind {
    Hypercube { dim: usize },
    UnitDisk,
}

impl DomainKind {
    pub fn hypercube(dim: usize) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        Ok(DomainKind::Hypercube { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainKind::Hypercube { dim } => *dim,
            DomainKind::UnitDisk => 2,
        }
    }

    /// Largest distance between two points of the domain, the natural upper
    /// bound for the threshold `τ`.
    pub fn diameter(&self) -> f64 {
        match self {
            DomainKind::Hypercube { dim } => (*dim as f64).sqrt(),
            DomainKind::UnitDisk => 2.0,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        match self {
            DomainKind::Hypercube { .. } => p
                .coords
                .iter()
                .all(|&c| (-1e-12..=1.0 + 1e-12).contains(&c)),
            DomainKind::UnitDisk => p.norm() <= 1.0 + 1e-12,
        }
    }

    /// Distance from `p` to the domain boundary (0 on the boundary).
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        match self {
            DomainKind::Hypercube { .. } => p
                .coords
                .iter()
                .map(|&c| c.min(1.0 - c))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            DomainKind::UnitDisk => (1.0 - p.norm()).max(0.0),
        }
    }

    /// Clamps roundoff excursions back into the domain.
    fn project(&self, mut p: Point) -> Point {
        match self {
            DomainKind::Hypercube { .. } => {
                for c in &mut p.coords {
                    *c = c.clamp(0.0, 1.0);
                }
                p
            }
            DomainKind::UnitDisk => {
                let norm = p.norm();
                if norm > 1.0 {
                    for c in &mut p.coords {
                        *c /= norm;
                    }
                }
                p
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        match self {
            DomainKind::Hypercube { dim } => {
                Point::new((0..*dim).map(|_| rng.gen::<f64>()).collect())
            }
            DomainKind::UnitDisk => loop {
                let x = 2.0 * rng.gen::<f64>() - 1.0;
                let y = 2.0 * rng.gen::<f64>() - 1.0;
                if x * x + y * y <= 1.0 {
                    return Point::new(vec![x, y]);
                }
            },
        }
    }
}

fn check_inputs(p: &Point, q: &Point, domain: &DomainKind) -> Result<(), GeometryError> {
    for pt in [p, q] {
        if pt.dim() != domain.dim() {
            return Err(GeometryError::DimensionMismatch {
                point: pt.dim(),
                domain: domain.dim(),
            });
        }
        if !domain.contains(pt) {
            return Err(GeometryError::PointOutsideDomain);
        }
    }
    Ok(())
}

/// The two intersections of the infinite line through `p` and `q` with the
/// domain boundary, returned `(a, b)` so that `a, p, q, b` are collinear in
/// that order. A point already on the boundary is its own intersection on
/// its side, making it a repulsion fixed point.
pub fn boundary_intersections(
    p: &Point,
    q: &Point,
    domain: &DomainKind,
) -> Result<(Point, Point), GeometryError> {
    check_inputs(p, q, domain)?;
    if p == q {
        return Err(GeometryError::CoincidentPoints);
    }
    // Line r(t) = p + t·(q - p); p is t = 0, q is t = 1. Both inside means
    // t_min <= 0 and t_max >= 1.
    let (t_min, t_max) = match domain {
        DomainKind::Hypercube { .. } => {
            let mut t_min = f64::NEG_INFINITY;
            let mut t_max = f64::INFINITY;
            for (pc, qc) in p.coords.iter().zip(&q.coords) {
                let d = qc - pc;
                if d.abs() < 1e-15 {
                    continue; // parallel to this slab; pc already inside
                }
                let t0 = (0.0 - pc) / d;
                let t1 = (1.0 - pc) / d;
                t_min = t_min.max(t0.min(t1));
                t_max = t_max.min(t0.max(t1));
            }
            (t_min, t_max)
        }
        DomainKind::UnitDisk => {
            let d: Vec<f64> = p.coords.iter().zip(&q.coords).map(|(a, b)| b - a).collect();
            let dd: f64 = d.iter().map(|x| x * x).sum();
            let pd: f64 = p.coords.iter().zip(&d).map(|(a, b)| a * b).sum();
            let pp: f64 = p.coords.iter().map(|x| x * x).sum();
            let disc = (pd * pd - dd * (pp - 1.0)).max(0.0);
            let root = disc.sqrt();
            ((-pd - root) / dd, (-pd + root) / dd)
        }
    };
    let a = domain.project(p.lerp(q, t_min.min(0.0)));
    let b = domain.project(p.lerp(q, t_max.max(1.0)));
    Ok((a, b))
}

/// Pairwise interaction along the line through the two points: attraction
/// within `τ` contracts the pair around its midpoint (new distance
/// `(1-λ)·d`, the one-dimensional semantics); beyond `τ` each point shrinks
/// its distance to its own boundary intersection by `1-μ`. Coincident
/// points do not move. The pair is normalized lexicographically first, so
/// the map is exactly order-invariant.
pub fn interact_points(
    p: &Point,
    q: &Point,
    params: &ModelParams,
    domain: &DomainKind,
) -> Result<(Point, Point), GeometryError> {
    check_inputs(p, q, domain)?;
    let swapped = lex_greater(p, q);
    let (lo, hi) = if swapped { (q, p) } else { (p, q) };

    let d = lo.distance(hi);
    let (lo_next, hi_next) = if d == 0.0 {
        (lo.clone(), hi.clone())
    } else if d <= params.tau() {
        let t = params.nu(); // each endpoint moves λ/2 of the gap inwards
        (lo.lerp(hi, t), hi.lerp(lo, t))
    } else {
        let (a, b) = boundary_intersections(lo, hi, domain)?;
        let keep = 1.0 - params.mu();
        (
            domain.project(a.lerp(lo, keep)),
            domain.project(b.lerp(hi, keep)),
        )
    };

    if swapped {
        Ok((hi_next, lo_next))
    } else {
        Ok((lo_next, hi_next))
    }
}

fn lex_greater(p: &Point, q: &Point) -> bool {
    for (a, b) in p.coords.iter().zip(&q.coords) {
        if a < b {
            return false;
        }
        if a > b {
            return true;
        }
    }
    false
}

/// Single-linkage cluster summary of a point cloud.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    /// `(centroid, member count)` per cluster; counts sum to n.
    pub clusters: Vec<(Point, usize)>,
    pub linkage_radius: f64,
}

/// Groups points by single linkage: two points share a cluster when they
/// are connected by a chain of hops, each no longer than `radius`.
pub fn single_linkage(points: &[Point], radius: f64) -> ClusterSummary {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut walk = i;
        while parent[walk] != root {
            let next = parent[walk];
            parent[walk] = root;
            walk = next;
        }
        root
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if points[i].distance(&points[j]) <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        members.entry(root).or_default().push(i);
    }

    let clusters = members
        .values()
        .map(|idxs| {
            let dim = points[idxs[0]].dim();
            let mut center = vec![0.0; dim];
            for &i in idxs {
                for (c, v) in center.iter_mut().zip(&points[i].coords) {
                    *c += v;
                }
            }
            for c in &mut center {
                *c /= idxs.len() as f64;
            }
            (Point::new(center), idxs.len())
        })
        .collect();

    ClusterSummary {
        clusters,
        linkage_radius: radius,
    }
}

/// Qualitative outcome of a population run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeLabel {
    /// One cluster.
    Consensus,
    /// Several clusters, all centered within ε of the boundary.
    Polarized,
    /// Stationary but neither of the above.
    Mixed,
    /// Not stationary within the round budget.
    Undecided,
}

/// Scheduler reused from the one-dimensional engine: uniform pairs (a round
/// is ⌊n/2⌋ single-pair steps) or a random perfect matching per round.
pub use crate::engine::SchedulerKind;

#[derive(Debug, Clone)]
pub struct MultiDimConfig {
    pub n: usize,
    pub params: ModelParams,
    pub domain: DomainKind,
    pub scheduler: SchedulerKind,
    /// Stationarity threshold, cluster linkage radius, and boundary
    /// proximity tolerance. Default `min(τ/2, 0.05)`.
    pub epsilon: f64,
    pub max_rounds: u64,
    pub seed: u64,
    /// Record the point cloud every k rounds (the initial and final clouds
    /// are always included).
    pub snapshot_every: Option<u64>,
}

impl MultiDimConfig {
    pub fn new(n: usize, params: ModelParams, domain: DomainKind, seed: u64) -> Self {
        MultiDimConfig {
            n,
            params,
            domain,
            scheduler: SchedulerKind::RandomMatching,
            epsilon: (params.tau() / 2.0).min(0.05),
            max_rounds: 10_000,
            seed,
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiDimResult {
    pub clusters: ClusterSummary,
    pub label: OutcomeLabel,
    pub rounds: u64,
    pub stationary: bool,
    pub snapshots: Vec<(u64, Vec<Point>)>,
    pub final_points: Vec<Point>,
}

/// Rounds of sub-ε movement required before the cloud counts as
/// stationary. A fixed short window misses stragglers: a specific pair
/// meets only with probability `1/(n-1)` per round, so agents whose only
/// remaining moves happen on rare meetings can sit still through any
/// window that does not scale with `n`. Four meeting times per pair make
/// such an unfinished merge overwhelmingly unlikely to be declared final.
fn stationary_window(n: usize) -> u64 {
    (4 * n as u64).max(10)
}

/// Simulates the population from iid uniform initial positions until the
/// movement criterion declares it stationary (or the budget runs out), then
/// summarizes the cloud with single-linkage clusters of radius ε.
pub fn run_multidim(config: &MultiDimConfig) -> Result<MultiDimResult, GeometryError> {
    if config.n < 2 {
        return Err(GeometryError::PopulationTooSmall);
    }
    if config.scheduler == SchedulerKind::RandomMatching && !config.n.is_multiple_of(2) {
        return Err(GeometryError::OddPopulation);
    }
    if config.epsilon.is_nan() || config.epsilon <= 0.0 {
        return Err(GeometryError::InvalidEpsilon);
    }
    if config.domain.dim() == 0 {
        return Err(GeometryError::ZeroDimension);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[config.n as u64]));
    let mut points: Vec<Point> = (0..config.n)
        .map(|_| config.domain.sample(&mut rng))
        .collect();

    let mut snapshots = Vec::new();
    if config.snapshot_every.is_some() {
        snapshots.push((0, points.clone()));
    }

    let window = stationary_window(config.n);
    let mut calm_rounds = 0u64;
    let mut rounds = 0u64;
    let mut stationary = false;

    while rounds < config.max_rounds {
        let mut max_move: f64 = 0.0;
        let pairs: Vec<(usize, usize)> = match config.scheduler {
            SchedulerKind::RandomMatching => draw_matching(config.n, &mut rng),
            SchedulerKind::UniformPair => (0..(config.n / 2).max(1))
                .map(|_| draw_uniform_pair(config.n, &mut rng))
                .collect(),
        };
        for (i, j) in pairs {
            let (pi, pj) = interact_points(&points[i], &points[j], &config.params, &config.domain)?;
            max_move = max_move
                .max(points[i].distance(&pi))
                .max(points[j].distance(&pj));
            points[i] = pi;
            points[j] = pj;
        }
        rounds += 1;

        if let Some(k) = config.snapshot_every {
            if rounds.is_multiple_of(k.max(1)) {
                snapshots.push((rounds, points.clone()));
            }
        }

        if max_move < config.epsilon {
            calm_rounds += 1;
            if calm_rounds >= window {
                stationary = true;
                break;
            }
        } else {
            calm_rounds = 0;
        }
    }

    if config.snapshot_every.is_some() && snapshots.last().map(|(r, _)| *r) != Some(rounds) {
        snapshots.push((rounds, points.clone()));
    }

    let clusters = single_linkage(&points, config.epsilon);
    let label = if !stationary {
        OutcomeLabel::Undecided
    } else if clusters.clusters.len() == 1 {
        OutcomeLabel::Consensus
    } else if clusters
        .clusters
        .iter()
        .all(|(center, _)| config.domain.boundary_distance(center) < config.epsilon)
    {
        OutcomeLabel::Polarized
    } else {
        OutcomeLabel::Mixed
    };

    Ok(MultiDimResult {
        clusters,
        label,
        rounds,
        stationary,
        snapshots,
        final_points: points,
    })
}
