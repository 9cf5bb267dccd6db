//! Projection-augmented gradient ascent on the concentrated profit.
//!
//! The update is the plain recursion `y[k+1] = y[k] + mu * grad J(y[k])`,
//! where the gradient is the fixed-intensity likelihood gradient evaluated
//! at the re-profiled intensity `A_hat(y[k])`. Candidates that leave the
//! open hull are replaced by a fresh uniform interior point (random
//! projection); in-hull candidates inside the sensor guard radius get the
//! same treatment, since the objective is undefined there.
//!
//! Two step rules are provided. The default is a backtracking line search
//! on the concentrated profit (Armijo sufficient increase, halving), whose
//! first trial displaces by a tenth of the hull diameter. A fixed step
//! accepts any user value so the recursion can also be run exactly as
//! printed.
//!
//! When measurement resampling is on, a fresh count vector is drawn before
//! every gradient evaluation; the line search for that iteration uses the
//! same draw, so each accepted step ascends the current sample's profit.

use std::io::Write;

use serde::Serialize;

use crate::geometry::{self, GeometryError, Point, SensorArray};
use crate::likelihood::{self, LikelihoodContext, LikelihoodError};
use crate::model::{self, Measurement, ModelError, NoiseParams, SourceParams};
use crate::rng::RandomStream;
use crate::serialize::float17;

/// Stop when `|grad J| * diameter / |J|` drops below this (default).
pub const DEFAULT_GRADIENT_TOL: f64 = 1e-10;

/// Stop when a non-escaped step displaces less than this fraction of the
/// hull diameter.
pub const DISPLACEMENT_TOL_REL: f64 = 1e-9;

/// First line-search trial displaces by this fraction of the diameter.
pub const BACKTRACK_INITIAL_REL: f64 = 0.1;

/// Armijo sufficient-increase coefficient.
pub const ARMIJO_C: f64 = 1e-4;

/// Step-halving factor.
pub const BACKTRACK_FACTOR: f64 = 0.5;

const MAX_BACKTRACKS: usize = 60;

/// Consecutive all-zero draws tolerated before the run is declared
/// degenerate.
pub const MAX_DEGENERATE_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("initial point is outside the open hull")]
    StartOutsideHull,
    #[error("source location is outside the open hull")]
    SourceOutsideHull,
    #[error("measurements are persistently all-zero; estimate is undefined")]
    DegenerateMeasurement,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Step-size rule: exactly one of a fixed step or backtracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepRule {
    /// `y += mu * grad` with a constant `mu`.
    Fixed(f64),
    /// Backtracking line search on the concentrated profit.
    Backtracking,
}

/// Gradient-ascent tuning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub step: StepRule,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub resample_each_iteration: bool,
    /// Report the best-profit iterate instead of the final one.
    pub report_best_profit: bool,
    pub seed: u64,
}

impl EstimatorConfig {
    /// Line-search defaults: 500 iterations, live resampling.
    pub fn backtracking(seed: u64) -> Self {
        Self {
            step: StepRule::Backtracking,
            max_iterations: 500,
            gradient_tolerance: DEFAULT_GRADIENT_TOL,
            resample_each_iteration: true,
            report_best_profit: false,
            seed,
        }
    }

    pub fn fixed_step(mu: f64, seed: u64) -> Self {
        Self {
            step: StepRule::Fixed(mu),
            ..Self::backtracking(seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    MaxIterations,
    DegenerateMeasurement,
}

/// One row of the iterate history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateRecord {
    pub k: usize,
    pub y: Point,
    pub profit: f64,
    pub grad_norm: f64,
    /// True when this iterate was produced by a random projection.
    pub escaped: bool,
}

/// Full history of one gradient-ascent run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateTrace {
    pub iterates: Vec<IterateRecord>,
    pub final_estimate: Point,
    pub final_intensity: f64,
    pub termination: TerminationReason,
}

impl EstimateTrace {
    /// Number of update steps taken (iterate count minus the start point).
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn escaped_iterations(&self) -> usize {
        self.iterates.iter().filter(|r| r.escaped).count()
    }

    /// Line-oriented CSV: `k, y coordinates, J, grad_norm, escaped`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.final_estimate.dim();
        write!(w, "k")?;
        for i in 1..=dim {
            write!(w, ",y{i}")?;
        }
        writeln!(w, ",J,grad_norm,escaped")?;
        for r in &self.iterates {
            write!(w, "{}", r.k)?;
            for c in r.y.coords() {
                write!(w, ",{}", float17(*c))?;
            }
            writeln!(
                w,
                ",{},{},{}",
                float17(r.profit),
                float17(r.grad_norm),
                u8::from(r.escaped)
            )?;
        }
        Ok(())
    }
}

/// Supplies the count vector for each iteration.
pub trait MeasurementProvider {
    fn draw_into(
        &mut self,
        rng: &mut RandomStream,
        out: &mut Vec<f64>,
    ) -> Result<(), EstimatorError>;
}

/// Always returns the same counts: deterministic ML estimation from one
/// observed measurement.
pub struct FixedCounts(pub Vec<f64>);

impl MeasurementProvider for FixedCounts {
    fn draw_into(
        &mut self,
        _rng: &mut RandomStream,
        out: &mut Vec<f64>,
    ) -> Result<(), EstimatorError> {
        out.clear();
        out.extend_from_slice(&self.0);
        Ok(())
    }
}

/// Draws a fresh Poisson measurement from the model on every call.
pub struct PoissonCounts<'a> {
    pub source: &'a SourceParams,
    pub array: &'a SensorArray,
    pub noise: &'a NoiseParams,
}

impl MeasurementProvider for PoissonCounts<'_> {
    fn draw_into(
        &mut self,
        rng: &mut RandomStream,
        out: &mut Vec<f64>,
    ) -> Result<(), EstimatorError> {
        let m: Measurement = model::sample_measurement(self.source, self.array, self.noise, rng)?;
        out.clear();
        out.extend(m.counts().iter().map(|&c| c as f64));
        Ok(())
    }
}

/// If `candidate` is in the open hull, return it unchanged; otherwise return
/// a fresh flat-Dirichlet interior sample with the escape flag set.
pub fn project_if_escaped(
    array: &SensorArray,
    candidate: &Point,
    rng: &mut RandomStream,
) -> (Point, bool) {
    if geometry::contains_open(array, candidate).unwrap_or(false) {
        (*candidate, false)
    } else {
        (geometry::sample_interior(array, rng), true)
    }
}

/// Like [`project_if_escaped`], additionally treating in-hull points inside
/// the sensor guard radius as escapes (the objective is undefined there).
fn project_off_sensors(
    array: &SensorArray,
    candidate: &Point,
    guard: f64,
    rng: &mut RandomStream,
) -> (Point, bool) {
    let (mut p, mut escaped) = project_if_escaped(array, candidate, rng);
    while array.sensors().iter().any(|s| s.distance(&p) <= guard) {
        p = geometry::sample_interior(array, rng);
        escaped = true;
    }
    (p, escaped)
}

/// Interior start point clear of the sensor guard radius.
fn sample_start(array: &SensorArray, guard: f64, rng: &mut RandomStream) -> Point {
    loop {
        let p = geometry::sample_interior(array, rng);
        if array.sensors().iter().all(|s| s.distance(&p) > guard) {
            return p;
        }
    }
}

fn draw_nonzero(
    provider: &mut dyn MeasurementProvider,
    rng: &mut RandomStream,
    out: &mut Vec<f64>,
) -> Result<bool, EstimatorError> {
    for _ in 0..MAX_DEGENERATE_RETRIES {
        provider.draw_into(rng, out)?;
        if out.iter().any(|&c| c > 0.0) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Run the ascent from `y0`, drawing counts from `provider`.
///
/// A fresh count vector is drawn before each gradient evaluation when the
/// config enables resampling; otherwise the first draw is reused. The run
/// terminates on the scaled gradient tolerance, on a sub-tolerance
/// displacement, or at the iteration cap. A persistently all-zero provider
/// terminates the trace with the degenerate-measurement reason (or fails
/// outright if not even the first iterate can be evaluated).
pub fn ascend(
    array: &SensorArray,
    attenuation: f64,
    provider: &mut dyn MeasurementProvider,
    config: &EstimatorConfig,
    y0: &Point,
    rng: &mut RandomStream,
) -> Result<EstimateTrace, EstimatorError> {
    if !geometry::contains_open(array, y0)? {
        return Err(EstimatorError::StartOutsideHull);
    }
    let diameter = array.diameter();
    let guard = likelihood::SENSOR_GUARD_REL * diameter;

    let mut counts: Vec<f64> = Vec::with_capacity(array.len());
    if !draw_nonzero(provider, rng, &mut counts)? {
        return Err(EstimatorError::DegenerateMeasurement);
    }

    let mut y = *y0;
    let mut escaped = false;
    let mut iterates: Vec<IterateRecord> = Vec::new();
    let mut final_intensity = f64::NAN;
    let mut termination = TerminationReason::MaxIterations;

    for k in 0..=config.max_iterations {
        if k > 0 && config.resample_each_iteration && !draw_nonzero(provider, rng, &mut counts)? {
            termination = TerminationReason::DegenerateMeasurement;
            break;
        }
        let ctx = LikelihoodContext::new(array, attenuation, &counts)?;
        let a_hat = likelihood::intensity_mle(&ctx, &y)?;
        let profit = likelihood::log_likelihood(&ctx, a_hat, &y)?;
        let grad = likelihood::profit_gradient(&ctx, &y, a_hat)?;
        let grad_norm = grad.norm();

        debug_assert!(geometry::contains_open(array, &y).unwrap_or(false));
        iterates.push(IterateRecord {
            k,
            y,
            profit,
            grad_norm,
            escaped,
        });
        final_intensity = a_hat;

        if k == config.max_iterations {
            termination = TerminationReason::MaxIterations;
            break;
        }
        if grad_norm * diameter / profit.abs() < config.gradient_tolerance {
            termination = TerminationReason::Converged;
            break;
        }

        let candidate = match config.step {
            StepRule::Fixed(mu) => y.add_scaled(grad.components(), mu),
            StepRule::Backtracking => {
                line_search(&ctx, &y, profit, grad.components(), grad_norm, diameter)
            }
        };
        let (next, esc) = project_off_sensors(array, &candidate, guard, rng);
        if !esc && next.distance(&y) < DISPLACEMENT_TOL_REL * diameter {
            termination = TerminationReason::Converged;
            break;
        }
        y = next;
        escaped = esc;
    }

    let reported = if config.report_best_profit {
        iterates
            .iter()
            .max_by(|a, b| a.profit.total_cmp(&b.profit))
            .expect("trace nonempty")
            .y
    } else {
        iterates.last().expect("trace nonempty").y
    };

    Ok(EstimateTrace {
        iterates,
        final_estimate: reported,
        final_intensity,
        termination,
    })
}

/// Armijo backtracking on the concentrated profit. Returns `y` unchanged if
/// no trial step achieves sufficient increase (the displacement stop then
/// terminates the run).
///
/// The required increase has a floor of a few ulps of the profit: once the
/// remaining gain is below f64 resolution the search must fail rather than
/// accept rounding noise, otherwise the iterate random-walks on the
/// float-flat plateau around the maximum and never terminates.
fn line_search(
    ctx: &LikelihoodContext,
    y: &Point,
    profit_at_y: f64,
    direction: &[f64],
    grad_norm: f64,
    diameter: f64,
) -> Point {
    let floor = 4.0 * f64::EPSILON * profit_at_y.abs();
    let mut t = BACKTRACK_INITIAL_REL * diameter / grad_norm;
    for _ in 0..MAX_BACKTRACKS {
        let cand = y.add_scaled(direction, t);
        let j = likelihood::profit(ctx, &cand).unwrap_or(f64::NEG_INFINITY);
        if j >= profit_at_y + (ARMIJO_C * t * grad_norm * grad_norm).max(floor) {
            return cand;
        }
        t *= BACKTRACK_FACTOR;
    }
    *y
}

/// Draw a start point, then run [`ascend`] against live Poisson
/// measurements. Binds the model and the ascent into the Monte-Carlo
/// methodology: interior uniform start, live resampling per the config.
pub fn estimate_once(
    source: &SourceParams,
    array: &SensorArray,
    noise: &NoiseParams,
    config: &EstimatorConfig,
    rng: &mut RandomStream,
) -> Result<EstimateTrace, EstimatorError> {
    if !geometry::contains_open(array, source.location())? {
        return Err(EstimatorError::SourceOutsideHull);
    }
    let guard = likelihood::SENSOR_GUARD_REL * array.diameter();
    let y0 = sample_start(array, guard, rng);
    let mut provider = PoissonCounts {
        source,
        array,
        noise,
    };
    ascend(
        array,
        source.attenuation(),
        &mut provider,
        config,
        &y0,
        rng,
    )
}
