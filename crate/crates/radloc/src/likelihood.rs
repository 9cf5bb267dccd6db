//! Poisson log-likelihood, the closed-form intensity estimate, and the
//! concentrated profit function with its analytic gradient.
//!
//! With per-sensor rates `lambda_i = A g_i(y)`, `g_i(y) = exp(-alpha d_i)/d_i^2`,
//! the log-likelihood (constant term dropped) is
//!
//! ```text
//! L(A, y) = sum_i s_i ln lambda_i - lambda_i
//! ```
//!
//! For fixed `y` the intensity maximizer has the closed form
//! `A_hat(y) = sum_i s_i / sum_i g_i(y)`. The profit function maximized by
//! the estimator is the profile likelihood `J(y) = L(A_hat(y), y)`: the
//! intensity is re-profiled at every evaluation, and because
//! `dL/dA = 0` at `A_hat`, the fixed-`A` gradient evaluated at
//! `A = A_hat(y)` is exactly the gradient of `J` (envelope argument).
//!
//! The gradient is `sum_i xi_i (x_i - y)` with
//!
//! ```text
//! xi_i = (s_i d_i^2 / exp(-alpha d_i) - A) (alpha + 2/d_i) exp(-alpha d_i)/d_i^3
//!      = (s_i - lambda_i) (alpha + 2/d_i) / d_i
//! ```
//!
//! Both forms are computed and checked against each other.

use crate::geometry::{Point, SensorArray, MAX_DIM};
use crate::model::Measurement;

/// Evaluations closer to a sensor than `1e-6 * diameter` report a
/// singularity instead of returning huge or infinite values: the rate model
/// blows up as the distance vanishes, and iterates can wander close.
pub const SENSOR_GUARD_REL: f64 = 1e-6;

/// The two algebraic gradient forms must agree to this relative tolerance
/// (scaled cancellation-aware; see `profit_gradient`).
pub const GRADIENT_FORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LikelihoodError {
    #[error("count vector length {got} does not match sensor count {expected}")]
    CountLength { expected: usize, got: usize },
    #[error("counts must be finite and nonnegative")]
    BadCounts,
    #[error("attenuation must be nonnegative and finite, got {0}")]
    BadAttenuation(f64),
    #[error("intensity must be positive and finite, got {0}")]
    BadIntensity(f64),
    #[error("evaluation point is within the guard radius of sensor {sensor}")]
    SensorSingularity { sensor: usize },
    #[error("all counts are zero: intensity estimate is degenerate")]
    DegenerateMeasurement,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gradient is not finite")]
    NonFiniteGradient,
}

/// Fixed data of one likelihood problem: the array, the known attenuation,
/// and one vector of (real-valued) counts.
///
/// Counts are real so the same machinery serves both observed integer
/// measurements and the noise-free population objective whose counts are the
/// exact rates.
#[derive(Debug, Clone)]
pub struct LikelihoodContext<'a> {
    array: &'a SensorArray,
    attenuation: f64,
    counts: &'a [f64],
    guard_radius: f64,
}

impl<'a> LikelihoodContext<'a> {
    pub fn new(
        array: &'a SensorArray,
        attenuation: f64,
        counts: &'a [f64],
    ) -> Result<Self, LikelihoodError> {
        if counts.len() != array.len() {
            return Err(LikelihoodError::CountLength {
                expected: array.len(),
                got: counts.len(),
            });
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(LikelihoodError::BadCounts);
        }
        if !(attenuation.is_finite() && attenuation >= 0.0) {
            return Err(LikelihoodError::BadAttenuation(attenuation));
        }
        Ok(Self {
            array,
            attenuation,
            counts,
            guard_radius: SENSOR_GUARD_REL * array.diameter(),
        })
    }

    pub fn array(&self) -> &SensorArray {
        self.array
    }

    pub fn attenuation(&self) -> f64 {
        self.attenuation
    }

    pub fn counts(&self) -> &[f64] {
        self.counts
    }

    pub fn guard_radius(&self) -> f64 {
        self.guard_radius
    }

    pub fn total_counts(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn check_point(&self, y: &Point) -> Result<(), LikelihoodError> {
        if y.dim() != self.array.dim() {
            return Err(LikelihoodError::DimensionMismatch {
                expected: self.array.dim(),
                got: y.dim(),
            });
        }
        Ok(())
    }

    /// Distances and shape factors `g_i = exp(-alpha d_i)/d_i^2` at `y`.
    fn shapes(&self, y: &Point) -> Result<([f64; MAX_DIM + 1], [f64; MAX_DIM + 1]), LikelihoodError> {
        self.check_point(y)?;
        let mut d = [0.0; MAX_DIM + 1];
        let mut g = [0.0; MAX_DIM + 1];
        for (i, sensor) in self.array.sensors().iter().enumerate() {
            let di = sensor.distance(y);
            if di <= self.guard_radius {
                return Err(LikelihoodError::SensorSingularity { sensor: i });
            }
            d[i] = di;
            g[i] = (-self.attenuation * di).exp() / (di * di);
        }
        Ok((d, g))
    }
}

/// Convert an observed integer measurement into the real-valued counts a
/// [`LikelihoodContext`] takes.
pub fn counts_from_measurement(measurement: &Measurement) -> Vec<f64> {
    measurement.as_real()
}

/// Gradient of the profit function at a point: a length-N vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientValue {
    components: [f64; MAX_DIM],
    dim: usize,
}

impl GradientValue {
    fn new(components: [f64; MAX_DIM], dim: usize) -> Result<Self, LikelihoodError> {
        if components[..dim].iter().any(|c| !c.is_finite()) {
            return Err(LikelihoodError::NonFiniteGradient);
        }
        Ok(Self { components, dim })
    }

    pub fn from_components(components: &[f64]) -> Result<Self, LikelihoodError> {
        let dim = components.len().min(MAX_DIM);
        let mut buf = [0.0; MAX_DIM];
        buf[..dim].copy_from_slice(&components[..dim]);
        Self::new(buf, dim)
    }

    pub fn components(&self) -> &[f64] {
        &self.components[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }
}

/// Log-likelihood `L(A, y)` with the constant term dropped.
///
/// If a rate underflows to zero while its count is positive the result is
/// the `-inf` sentinel, which orders below every finite value and preserves
/// argmax semantics for grid search.
pub fn log_likelihood(
    ctx: &LikelihoodContext,
    intensity: f64,
    y: &Point,
) -> Result<f64, LikelihoodError> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(LikelihoodError::BadIntensity(intensity));
    }
    let (_, g) = ctx.shapes(y)?;
    let mut total = 0.0;
    for (i, s) in ctx.counts.iter().enumerate() {
        let lambda = intensity * g[i];
        if lambda == 0.0 {
            if *s > 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            continue; // 0 * ln 0 - 0
        }
        total += s * lambda.ln() - lambda;
    }
    Ok(total)
}

/// Closed-form intensity maximizer at fixed `y`:
/// `A_hat = sum s_i / sum g_i(y)`.
pub fn intensity_mle(ctx: &LikelihoodContext, y: &Point) -> Result<f64, LikelihoodError> {
    let total = ctx.total_counts();
    if total <= 0.0 {
        return Err(LikelihoodError::DegenerateMeasurement);
    }
    let (_, g) = ctx.shapes(y)?;
    let g_sum: f64 = g[..ctx.array.len()].iter().sum();
    Ok(total / g_sum)
}

/// Concentrated profit `J(y) = L(A_hat(y), y)`: the objective the estimator
/// ascends.
pub fn profit(ctx: &LikelihoodContext, y: &Point) -> Result<f64, LikelihoodError> {
    let a_hat = intensity_mle(ctx, y)?;
    log_likelihood(ctx, a_hat, y)
}

/// The gradient coefficients `xi_i` at `(y, A)`.
pub fn xi_coefficients(
    ctx: &LikelihoodContext,
    y: &Point,
    intensity: f64,
) -> Result<Vec<f64>, LikelihoodError> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(LikelihoodError::BadIntensity(intensity));
    }
    let (d, _) = ctx.shapes(y)?;
    Ok((0..ctx.array.len())
        .map(|i| {
            let di = d[i];
            let atten = (-ctx.attenuation * di).exp();
            (ctx.counts[i] * di * di / atten - intensity)
                * (ctx.attenuation + 2.0 / di)
                * atten
                / (di * di * di)
        })
        .collect())
}

/// Gradient of the profit function at fixed intensity:
/// `sum_i xi_i (x_i - y)`.
///
/// Evaluated with `A = A_hat(y)` this is the exact gradient of the
/// concentrated profit `J`. Internally both algebraic forms of `xi_i` are
/// computed and checked to [`GRADIENT_FORM_TOL`] with a cancellation-aware
/// scale.
pub fn profit_gradient(
    ctx: &LikelihoodContext,
    y: &Point,
    intensity: f64,
) -> Result<GradientValue, LikelihoodError> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(LikelihoodError::BadIntensity(intensity));
    }
    let (d, g) = ctx.shapes(y)?;
    let n = ctx.array.len();
    let dim = ctx.array.dim();
    let mut grad = [0.0f64; MAX_DIM];
    for i in 0..n {
        let di = d[i];
        let s = ctx.counts[i];
        let atten = (-ctx.attenuation * di).exp();
        let factor = ctx.attenuation + 2.0 / di;
        let xi = (s * di * di / atten - intensity) * factor * atten / (di * di * di);
        // Residual form of the same coefficient.
        let xi_residual = (s - intensity * g[i]) * factor / di;
        let scale = (s + intensity * g[i]).abs() * factor / di;
        debug_assert!(
            (xi - xi_residual).abs() <= GRADIENT_FORM_TOL * scale.max(f64::MIN_POSITIVE),
            "gradient coefficient forms disagree: {xi} vs {xi_residual}"
        );
        let edge = ctx.array.sensor(i).sub(y);
        for (k, e) in edge.coords().iter().enumerate() {
            grad[k] += xi * e;
        }
    }
    GradientValue::new(grad, dim)
}

/// Gradient via the residual form `sum_i (s_i - lambda_i)(alpha + 2/d_i)
/// (x_i - y)/d_i`. Algebraically equal to [`profit_gradient`]; kept as an
/// independent route for the form-agreement tests.
pub fn profit_gradient_residual_form(
    ctx: &LikelihoodContext,
    y: &Point,
    intensity: f64,
) -> Result<GradientValue, LikelihoodError> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(LikelihoodError::BadIntensity(intensity));
    }
    let (d, g) = ctx.shapes(y)?;
    let dim = ctx.array.dim();
    let mut grad = [0.0f64; MAX_DIM];
    for i in 0..ctx.array.len() {
        let xi = (ctx.counts[i] - intensity * g[i]) * (ctx.attenuation + 2.0 / d[i]) / d[i];
        let edge = ctx.array.sensor(i).sub(y);
        for (k, e) in edge.coords().iter().enumerate() {
            grad[k] += xi * e;
        }
    }
    GradientValue::new(grad, dim)
}
