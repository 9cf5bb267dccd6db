//! Brute-force verification machinery, independent of the gradient-ascent
//! path: exhaustive grid search of the concentrated profit over the hull, a
//! census of grid-local maxima, and central-difference gradient checks.
//!
//! The lattice is barycentric: uniform in weight space, so every lattice
//! point is inside the open hull by construction and the boundary margin is
//! exact. Grid evaluation is embarrassingly parallel; the census is a pure
//! reduction over the evaluated values, so results do not depend on
//! scheduling.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{self, Point, SensorArray};
use crate::likelihood::{self, GradientValue, LikelihoodContext, LikelihoodError};
use crate::model::{self, SourceParams};
use crate::rng::{self, RandomStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("grid resolution {0} below minimum of {MIN_RESOLUTION}")]
    ResolutionTooLow(usize),
    #[error("margin {margin} infeasible for {parts} weights")]
    BadMargin { margin: f64, parts: usize },
    #[error("objective is -inf over the whole lattice")]
    DegenerateObjective,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
}

/// Minimum lattice resolution (points per axis).
pub const MIN_RESOLUTION: usize = 8;

/// Default fraction of the barycentric range excluded near the boundary.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Barycentric lattice specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Lattice points per axis.
    pub resolution: usize,
    /// Every lattice weight satisfies `beta_i >= margin`.
    pub margin: f64,
}

impl GridSpec {
    pub fn new(resolution: usize, margin: f64) -> Result<Self, OracleError> {
        if resolution < MIN_RESOLUTION {
            return Err(OracleError::ResolutionTooLow(resolution));
        }
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(OracleError::BadMargin { margin, parts: 0 });
        }
        Ok(Self { resolution, margin })
    }

    pub fn with_resolution(resolution: usize) -> Result<Self, OracleError> {
        Self::new(resolution, DEFAULT_MARGIN)
    }

    fn check_parts(&self, parts: usize) -> Result<(), OracleError> {
        if self.margin * parts as f64 >= 1.0 {
            return Err(OracleError::BadMargin {
                margin: self.margin,
                parts,
            });
        }
        Ok(())
    }

    /// Largest displacement of a single lattice move: the per-step weight
    /// fraction times the longest simplex edge.
    pub fn lattice_spacing(&self, array: &SensorArray) -> f64 {
        let span = 1.0 - self.margin * array.len() as f64;
        span * array.diameter() / (self.resolution - 1) as f64
    }
}

/// Result of one exhaustive lattice search.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryCensus {
    pub global_argmax: Point,
    pub global_max: f64,
    /// Lattice cells whose objective strictly exceeds every in-hull
    /// neighbor (ties broken by lexicographic cell index).
    pub local_maxima_count: usize,
    /// The cells behind `local_maxima_count`.
    pub local_maxima: Vec<Point>,
    /// Cells whose discrete directional differences change sign (or vanish)
    /// along every lattice direction: candidate stationary cells.
    pub stationary_points: Vec<Point>,
    /// Number of exact objective ties encountered between neighboring
    /// cells; nonzero values flag degenerate plateaus.
    pub plateau_ties: usize,
}

/// All weight compositions `k` with `sum k = total` over `parts` parts,
/// lexicographic order.
fn compositions(parts: usize, total: u32) -> Vec<[u32; 4]> {
    let mut out = Vec::new();
    let mut cur = [0u32; 4];
    fill(&mut out, &mut cur, 0, parts, total);
    return out;

    fn fill(out: &mut Vec<[u32; 4]>, cur: &mut [u32; 4], idx: usize, parts: usize, left: u32) {
        if idx == parts - 1 {
            cur[idx] = left;
            out.push(*cur);
            return;
        }
        for k in 0..=left {
            cur[idx] = k;
            fill(out, cur, idx + 1, parts, left - k);
        }
    }
}

struct Lattice {
    cells: Vec<[u32; 4]>,
    index: HashMap<[u32; 4], usize>,
    points: Vec<Point>,
    parts: usize,
}

impl Lattice {
    fn build(array: &SensorArray, grid: &GridSpec) -> Result<Self, OracleError> {
        let parts = array.len();
        grid.check_parts(parts)?;
        if grid.resolution < MIN_RESOLUTION {
            return Err(OracleError::ResolutionTooLow(grid.resolution));
        }
        let steps = (grid.resolution - 1) as u32;
        let span = 1.0 - grid.margin * parts as f64;
        let cells = compositions(parts, steps);
        let index: HashMap<[u32; 4], usize> =
            cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let points = cells
            .iter()
            .map(|cell| {
                let mut weights = [0.0f64; 4];
                for (w, k) in weights.iter_mut().zip(cell.iter()) {
                    *w = grid.margin + span * (*k as f64) / steps as f64;
                }
                array.weighted_point(&weights[..parts])
            })
            .collect();
        Ok(Self {
            cells,
            index,
            points,
            parts,
        })
    }

    fn neighbor(&self, cell: &[u32; 4], inc: usize, dec: usize) -> Option<usize> {
        if cell[dec] == 0 {
            return None;
        }
        let mut n = *cell;
        n[inc] += 1;
        n[dec] -= 1;
        self.index.get(&n).copied()
    }
}

/// Exhaustively evaluate the concentrated profit on the barycentric lattice
/// and census the grid-local maxima.
///
/// Evaluation failures (guard-radius hits) count as `-inf`, which preserves
/// argmax semantics.
pub fn grid_argmax(ctx: &LikelihoodContext, grid: &GridSpec) -> Result<StationaryCensus, OracleError> {
    let array = ctx.array();
    let lattice = Lattice::build(array, grid)?;

    let values: Vec<f64> = lattice
        .points
        .par_iter()
        .map(|p| likelihood::profit(ctx, p).unwrap_or(f64::NEG_INFINITY))
        .collect();

    let (best_idx, best) = values
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.total_cmp(b))
        .expect("lattice nonempty");
    if !best.is_finite() {
        return Err(OracleError::DegenerateObjective);
    }

    let parts = lattice.parts;
    let mut local_maxima = Vec::new();
    let mut plateau_ties = 0usize;
    let mut stationary_points = Vec::new();

    for (idx, cell) in lattice.cells.iter().enumerate() {
        let v = values[idx];
        if !v.is_finite() {
            continue;
        }
        // A cell is a local max when it strictly beats every neighbor
        // (exact ties broken by lexicographic cell index and counted as
        // plateau warnings). The stationary flag is the discrete sign
        // pattern: along every lattice direction the one-sided differences
        // must not indicate a monotone pass-through, so peaks, pits and
        // saddles all qualify.
        let mut is_max = true;
        let mut is_stationary = true;
        for inc in 0..parts {
            for dec in 0..parts {
                if inc == dec {
                    continue;
                }
                if let Some(n) = lattice.neighbor(cell, inc, dec) {
                    if values[n] > v {
                        is_max = false;
                    } else if values[n] == v {
                        plateau_ties += 1;
                        if n < idx {
                            is_max = false;
                        }
                    }
                }
                if inc < dec {
                    let fwd = lattice.neighbor(cell, inc, dec);
                    let bwd = lattice.neighbor(cell, dec, inc);
                    match (fwd, bwd) {
                        (Some(f), Some(b)) => {
                            if (values[f] - v) * (v - values[b]) > 0.0 {
                                is_stationary = false;
                            }
                        }
                        // Boundary: stationary only if the lone inward
                        // move does not ascend.
                        (Some(n), None) | (None, Some(n)) => {
                            if values[n] > v {
                                is_stationary = false;
                            }
                        }
                        (None, None) => {}
                    }
                }
            }
        }
        if is_max {
            local_maxima.push(lattice.points[idx]);
        }
        if is_stationary {
            stationary_points.push(lattice.points[idx]);
        }
    }

    Ok(StationaryCensus {
        global_argmax: lattice.points[best_idx],
        global_max: *best,
        local_maxima_count: local_maxima.len(),
        local_maxima,
        stationary_points,
        plateau_ties,
    })
}

/// All nonzero moves in `{-1, 0, 1}^dim`.
fn stencil(dim: usize) -> Vec<[f64; 3]> {
    let mut dirs = Vec::with_capacity(3usize.pow(dim as u32) - 1);
    for code in 0..3usize.pow(dim as u32) {
        let mut d = [0.0f64; 3];
        let mut c = code;
        let mut nonzero = false;
        for slot in d.iter_mut().take(dim) {
            let t = (c % 3) as i32 - 1;
            c /= 3;
            *slot = t as f64;
            nonzero |= t != 0;
        }
        if nonzero {
            dirs.push(d);
        }
    }
    dirs
}

/// Derivative-free local ascent: adaptive pattern search over the
/// `{-1,0,1}^N` move stencil, doubling the step on success and quartering
/// it on a stalled poll, down to `min_step`. Uses objective evaluations
/// only, so the refinement stays independent of the analytic gradient it
/// helps to verify. Infeasible regions are encoded by returning `-inf`
/// from the objective.
pub fn refine_maximum<F>(f: F, start: &Point, initial_step: f64, min_step: f64) -> Point
where
    F: Fn(&Point) -> f64,
{
    let dim = start.dim();
    let dirs = stencil(dim);
    let mut x = *start;
    let mut fx = f(&x);
    let mut h = initial_step;
    let mut evals = 0usize;
    const MAX_EVALS: usize = 400_000;
    while h > min_step && evals < MAX_EVALS {
        let mut best: Option<(Point, f64)> = None;
        for d in &dirs {
            let cand = x.add_scaled(&d[..dim], h);
            let fc = f(&cand);
            evals += 1;
            if fc > best.as_ref().map_or(fx, |(_, b)| *b) {
                best = Some((cand, fc));
            }
        }
        match best {
            Some((cand, fc)) => {
                x = cand;
                fx = fc;
                h = (2.0 * h).min(initial_step);
            }
            None => h *= 0.25,
        }
    }
    x
}

/// True iff some stencil move from `p` at a scale in
/// `[min_scale, 100 * min_scale]` strictly increases `f` (beyond rounding).
/// Used to tell apart genuine stationary points (no ascent anywhere) from
/// hull-boundary stalls whose ascent direction points out of the hull.
fn ascends_nearby<F>(f: &F, p: &Point, min_scale: f64) -> bool
where
    F: Fn(&Point) -> f64,
{
    let fp = f(p);
    let dirs = stencil(p.dim());
    for scale in [min_scale, 10.0 * min_scale, 100.0 * min_scale] {
        for d in &dirs {
            let fc = f(&p.add_scaled(&d[..p.dim()], scale));
            if fc > fp + 1e-12 * fp.abs() {
                return true;
            }
        }
    }
    false
}

/// Central-difference gradient of an arbitrary scalar field; the shared
/// finite-difference core. `dim` is the point dimension, `step` the
/// half-step along each axis.
pub fn central_difference<F>(f: F, y: &Point, step: f64, dim: usize) -> Result<GradientValue, OracleError>
where
    F: Fn(&Point) -> Result<f64, LikelihoodError>,
{
    let mut components = [0.0f64; geometry::MAX_DIM];
    for axis in 0..dim {
        let mut dir = [0.0f64; geometry::MAX_DIM];
        dir[axis] = 1.0;
        let plus = f(&y.add_scaled(&dir[..dim], step))?;
        let minus = f(&y.add_scaled(&dir[..dim], -step))?;
        components[axis] = (plus - minus) / (2.0 * step);
    }
    GradientValue::from_components(&components[..dim]).map_err(OracleError::from)
}

/// Central-difference approximation of the fixed-intensity likelihood
/// gradient at `y`; the numerical oracle for the analytic gradient.
pub fn finite_difference_gradient(
    ctx: &LikelihoodContext,
    y: &Point,
    intensity: f64,
    step: f64,
) -> Result<GradientValue, OracleError> {
    central_difference(
        |p| likelihood::log_likelihood(ctx, intensity, p),
        y,
        step,
        ctx.array().dim(),
    )
}

/// Interior maxima and boundary stalls found by refining a census.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedMaxima {
    /// Distinct refined maxima in the open hull with no ascent direction at
    /// all — the stationary points the uniqueness claim is about.
    pub interior: Vec<Point>,
    /// Distinct refined limits whose only ascent directions leave the open
    /// hull: footprints of exterior attractors. The objective genuinely has
    /// stationary points outside (the mirror solutions of the range
    /// equations); the ascent algorithm handles excursions toward them by
    /// projection, and the uniqueness claim does not cover them.
    pub boundary_stalls: Vec<Point>,
}

/// Consolidate the raw grid-local maxima of a census into distinct maxima
/// of the continuous objective. Each cell is refined by hull-constrained
/// pattern search (exterior candidates score `-inf`); a refined limit
/// counts as an interior maximum only if no unconstrained stencil move
/// still ascends, which separates true stationary points from stalls
/// pressed against a facet by an exterior attractor. A sharp anisotropic
/// ridge turns into many raw grid maxima at any fixed resolution; after
/// refinement they collapse onto the true stationary points.
pub fn distinct_maxima(
    ctx: &LikelihoodContext,
    census: &StationaryCensus,
    grid: &GridSpec,
) -> RefinedMaxima {
    let array = ctx.array();
    let spacing = grid.lattice_spacing(array);
    let min_step = 1e-7 * array.diameter();

    let raw = |p: &Point| likelihood::profit(ctx, p).unwrap_or(f64::NEG_INFINITY);
    let constrained = |p: &Point| {
        if geometry::contains_open(array, p).unwrap_or(false) {
            raw(p)
        } else {
            f64::NEG_INFINITY
        }
    };

    let refined: Vec<(Point, bool)> = census
        .local_maxima
        .par_iter()
        .map(|cell| {
            let limit = refine_maximum(constrained, cell, spacing, min_step);
            let stalled = ascends_nearby(&raw, &limit, 2.0 * min_step);
            (limit, stalled)
        })
        .collect();

    let mut interior: Vec<Point> = Vec::new();
    let mut boundary_stalls: Vec<Point> = Vec::new();
    for (p, stalled) in refined {
        let bucket = if stalled {
            &mut boundary_stalls
        } else {
            &mut interior
        };
        if !bucket.iter().any(|c| c.distance(&p) <= spacing) {
            bucket.push(p);
        }
    }
    RefinedMaxima {
        interior,
        boundary_stalls,
    }
}

/// One trial record inside a uniqueness violation report.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessViolation {
    pub trial: usize,
    pub seed: u64,
    pub distinct_maxima: usize,
    pub raw_grid_maxima: usize,
    pub argmax_offset_spacings: f64,
}

/// Outcome of a random-configuration uniqueness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub dim: usize,
    pub trials: usize,
    pub resolution: usize,
    pub margin: f64,
    /// True iff every trial produced exactly one distinct maximum.
    pub all_unique: bool,
    /// Worst count of distinct (refined) maxima across trials.
    pub max_distinct_maxima: usize,
    /// Worst count of raw grid-local maxima across trials, before
    /// refinement; large values flag ridge-shaped objectives.
    pub max_raw_grid_maxima: usize,
    /// Trials whose refinement also found attractors outside the open
    /// hull. Informational: the claim under test does not cover exterior
    /// stationary points, and the ascent handles them by projection.
    pub trials_with_exterior_attractors: usize,
    /// Worst distance from the refined maximum to the true source, in
    /// units of the lattice spacing.
    pub worst_argmax_offset_spacings: f64,
    pub violations: Vec<UniquenessViolation>,
}

/// Result of one reproducible uniqueness trial.
#[derive(Debug, Clone)]
pub struct UniquenessTrial {
    pub census: StationaryCensus,
    pub maxima: RefinedMaxima,
    /// Distance from the nearest interior refined maximum to the true
    /// source, in lattice spacings.
    pub argmax_offset_spacings: f64,
}

/// Sweep `trials` random (array, interior source) configurations in the
/// given dimension, run [`grid_argmax`] on the noise-free objective of each
/// (real-valued counts equal to the exact rates), refine the census, and
/// report how many distinct maxima every trial produced.
///
/// Every trial derives its own seed from the supplied stream so violations
/// can be reproduced in isolation.
pub fn verify_uniqueness(
    dim: usize,
    intensity: f64,
    attenuation: f64,
    grid: &GridSpec,
    trials: usize,
    rng: &mut RandomStream,
) -> Result<UniquenessReport, OracleError> {
    let mut violations = Vec::new();
    let mut max_distinct = 0usize;
    let mut max_raw = 0usize;
    let mut worst_offset = 0.0f64;
    let mut trials_with_exterior = 0usize;

    for trial in 0..trials {
        let seed = rng::next_seed(rng);
        let outcome = uniqueness_trial(dim, intensity, attenuation, grid, seed)?;
        max_distinct = max_distinct.max(outcome.maxima.interior.len());
        max_raw = max_raw.max(outcome.census.local_maxima_count);
        worst_offset = worst_offset.max(outcome.argmax_offset_spacings);
        trials_with_exterior += usize::from(!outcome.maxima.boundary_stalls.is_empty());
        if outcome.maxima.interior.len() != 1 {
            violations.push(UniquenessViolation {
                trial,
                seed,
                distinct_maxima: outcome.maxima.interior.len(),
                raw_grid_maxima: outcome.census.local_maxima_count,
                argmax_offset_spacings: outcome.argmax_offset_spacings,
            });
        }
    }

    Ok(UniquenessReport {
        dim,
        trials,
        resolution: grid.resolution,
        margin: grid.margin,
        all_unique: violations.is_empty(),
        max_distinct_maxima: max_distinct,
        max_raw_grid_maxima: max_raw,
        trials_with_exterior_attractors: trials_with_exterior,
        worst_argmax_offset_spacings: worst_offset,
        violations,
    })
}

/// One reproducible uniqueness trial against a random configuration.
pub fn uniqueness_trial(
    dim: usize,
    intensity: f64,
    attenuation: f64,
    grid: &GridSpec,
    seed: u64,
) -> Result<UniquenessTrial, OracleError> {
    let mut stream = rng::stream_from_seed(seed);
    let array = geometry::random_array(dim, 200.0, &mut stream)?;
    let y_star = geometry::sample_interior(&array, &mut stream);
    let source = SourceParams::new(y_star, intensity, attenuation)
        .map_err(OracleError::Model)?;
    let counts = model::mean_rates(&source, &array)?;
    let ctx = LikelihoodContext::new(&array, attenuation, &counts)?;
    let census = grid_argmax(&ctx, grid)?;
    let maxima = distinct_maxima(&ctx, &census, grid);
    let offset = maxima
        .interior
        .iter()
        .map(|p| p.distance(&y_star))
        .fold(f64::INFINITY, f64::min)
        / grid.lattice_spacing(&array);
    Ok(UniquenessTrial {
        census,
        maxima,
        argmax_offset_spacings: offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_interior;
    use crate::model::mean_rates;
    use crate::rng::stream_from_seed;
    use approx::assert_relative_eq;

    fn array_2d() -> SensorArray {
        SensorArray::from_coords(&[vec![0.0, 0.0], vec![200.0, 0.0], vec![50.0, 200.0]]).unwrap()
    }

    fn noise_free_counts(array: &SensorArray, location: &[f64]) -> (SourceParams, Vec<f64>) {
        let source =
            SourceParams::new(Point::new(location).unwrap(), 5e7, 0.0068).unwrap();
        let counts = mean_rates(&source, array).unwrap();
        (source, counts)
    }

    #[test]
    fn grid_finds_paper_source_2d() {
        let array = array_2d();
        let (source, counts) = noise_free_counts(&array, &[120.0, 40.0]);
        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        let grid = GridSpec::with_resolution(200).unwrap();
        let census = grid_argmax(&ctx, &grid).unwrap();
        assert_eq!(census.local_maxima_count, 1);
        assert_eq!(census.plateau_ties, 0);
        assert!(
            census.global_argmax.distance(source.location())
                <= grid.lattice_spacing(&array),
            "argmax {:?} not adjacent to the source",
            census.global_argmax.coords()
        );
    }

    #[test]
    fn grid_finds_remark_argmax_1d() {
        let array = SensorArray::from_coords(&[vec![0.0], vec![1.0]]).unwrap();
        let counts = [2.25, 9.0];
        let ctx = LikelihoodContext::new(&array, 0.0, &counts).unwrap();
        let grid = GridSpec::with_resolution(10_000).unwrap();
        let census = grid_argmax(&ctx, &grid).unwrap();
        assert_eq!(census.local_maxima_count, 1);
        assert!((census.global_argmax.coords()[0] - 2.0 / 3.0).abs() <= 1e-4);
    }

    #[test]
    fn grid_symmetric_config_peaks_at_centroid() {
        // Equilateral triangle with the source at the centroid.
        let h = 3f64.sqrt() / 2.0 * 200.0;
        let array = SensorArray::from_coords(&[
            vec![0.0, 0.0],
            vec![200.0, 0.0],
            vec![100.0, h],
        ])
        .unwrap();
        let centroid = array.centroid();
        let (_, counts) = noise_free_counts(&array, centroid.coords());
        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        let grid = GridSpec::with_resolution(121).unwrap();
        let census = grid_argmax(&ctx, &grid).unwrap();
        assert_eq!(census.local_maxima_count, 1);
        assert!(census.global_argmax.distance(&centroid) <= grid.lattice_spacing(&array));
    }

    #[test]
    fn refinement_keeps_single_maximum() {
        let array = array_2d();
        let (_, counts) = noise_free_counts(&array, &[73.0, 91.0]);
        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        for res in [50, 100, 200] {
            let grid = GridSpec::with_resolution(res).unwrap();
            let census = grid_argmax(&ctx, &grid).unwrap();
            assert_eq!(census.local_maxima_count, 1, "resolution {res}");
        }
    }

    #[test]
    fn fd_reproduces_quadratic_gradient() {
        // Oracle self-test on |y|^2, gradient 2y.
        let y = Point::new(&[3.0, -1.5]).unwrap();
        let g = central_difference(|p| Ok(p.dot(p)), &y, 1e-4, 2).unwrap();
        assert_relative_eq!(g.components()[0], 6.0, epsilon = 1e-8);
        assert_relative_eq!(g.components()[1], -3.0, epsilon = 1e-8);
    }

    #[test]
    fn fd_error_is_second_order() {
        // Cubic field: the central-difference error is exactly h^2 per
        // component, so halving the step divides the error by 4.
        let y = Point::new(&[0.7, -0.4]).unwrap();
        let f = |p: &Point| -> Result<f64, LikelihoodError> {
            Ok(p.coords().iter().map(|c| c * c * c).sum())
        };
        let exact: Vec<f64> = y.coords().iter().map(|c| 3.0 * c * c).collect();
        let err = |step: f64| {
            let g = central_difference(f, &y, step, 2).unwrap();
            g.components()
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "step-halving error ratio {ratio} not ~4"
        );
    }

    #[test]
    fn fd_hits_sensor_guard() {
        let array = array_2d();
        let counts = [10.0, 10.0, 10.0];
        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        // Guard radius is 2.5e-4 here; the minus perturbation lands at
        // distance 2e-4 from sensor 0.
        let y = Point::new(&[5e-4, 0.0]).unwrap();
        let res = finite_difference_gradient(&ctx, &y, 1e6, 3e-4);
        assert!(matches!(
            res.unwrap_err(),
            OracleError::Likelihood(LikelihoodError::SensorSingularity { .. })
        ));
    }

    #[test]
    fn fd_matches_analytic_gradient_at_random_points() {
        let mut rng = stream_from_seed(401);
        let array = array_2d();
        let (_, counts) = noise_free_counts(&array, &[120.0, 40.0]);
        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        let step = 1e-5 * array.diameter();
        for _ in 0..100 {
            let y = sample_interior(&array, &mut rng);
            if array.sensors().iter().any(|s| s.distance(&y) < 10.0 * step) {
                continue;
            }
            let a = 3e7;
            let analytic = likelihood::profit_gradient(&ctx, &y, a).unwrap();
            let fd = finite_difference_gradient(&ctx, &y, a, step).unwrap();
            let scale = analytic.norm().max(fd.norm());
            for (g, f) in analytic.components().iter().zip(fd.components()) {
                assert!(
                    (g - f).abs() <= 1e-6 * scale,
                    "analytic {g} vs fd {f} (scale {scale})"
                );
            }
        }
    }

    #[test]
    fn uniqueness_trial_reproducible() {
        let grid = GridSpec::with_resolution(60).unwrap();
        let a = uniqueness_trial(2, 5e7, 0.0068, &grid, 12345).unwrap();
        let b = uniqueness_trial(2, 5e7, 0.0068, &grid, 12345).unwrap();
        assert_eq!(a.census.global_argmax, b.census.global_argmax);
        assert_eq!(a.census.global_max, b.census.global_max);
        assert_eq!(a.maxima, b.maxima);
        assert_eq!(a.argmax_offset_spacings, b.argmax_offset_spacings);
    }

    #[test]
    fn ridge_artifacts_refine_to_one_maximum() {
        // This seed produces a source close to one sensor: the objective is
        // a sharp circular ridge and the raw census sees dozens of grid
        // maxima along the crest. All of them must refine to the single
        // true maximum.
        let grid = GridSpec::with_resolution(60).unwrap();
        let outcome = uniqueness_trial(2, 5e7, 0.0068, &grid, 3080959604347521991).unwrap();
        assert!(
            outcome.census.local_maxima_count > 1,
            "expected a ridge-artifact configuration"
        );
        assert_eq!(
            outcome.maxima.interior.len(),
            1,
            "interior maxima: {:?}",
            outcome.maxima.interior
        );
        assert!(outcome.argmax_offset_spacings <= 1.0);
    }

    #[test]
    fn small_uniqueness_sweep_passes() {
        let grid = GridSpec::with_resolution(60).unwrap();
        let mut rng = stream_from_seed(2024);
        let report = verify_uniqueness(2, 5e7, 0.0068, &grid, 10, &mut rng).unwrap();
        assert!(report.all_unique, "violations: {:?}", report.violations);
        assert_eq!(report.max_distinct_maxima, 1);
    }
}
