//! Maximum-likelihood localization of a radioactive point source with
//! unknown intensity, from exactly N+1 Poisson count sensors in R^N,
//! N in {1, 2, 3}.
//!
//! The source emits at an unknown intensity with known attenuation; each
//! sensor reports a Poisson count whose mean follows the attenuated
//! inverse-square law plus background. Localization maximizes the profit
//! function — the log-likelihood with the intensity concentrated out
//! through its closed form — by projection-augmented gradient ascent:
//! iterates that leave the open convex hull of the sensors are replaced by
//! random interior points. Inside that hull the concentrated objective has
//! no false stationary points, so the ascent does not depend on its
//! initialization.
//!
//! Module map:
//!
//! - [`geometry`]: simplex hull arithmetic, barycentric coordinates,
//!   interior sampling, separating-hyperplane predicates.
//! - [`model`]: mean count rates, Poisson measurement generation, SNR.
//! - [`poisson`]: seedable Poisson variate generation.
//! - [`likelihood`]: log-likelihood, closed-form intensity estimate,
//!   concentrated profit and its analytic gradient.
//! - [`estimator`]: the projected gradient ascent with tracing.
//! - [`oracle`]: brute-force grid verification and finite-difference
//!   gradient checks, independent of the ascent path.
//! - [`harness`]: Monte-Carlo RMSE/escape-rate experiments.
//! - [`rng`]: seeded streams and the parallel seed-derivation rule.

pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod likelihood;
pub mod model;
pub mod oracle;
pub mod poisson;
pub mod rng;
pub mod serialize;

pub use estimator::{ascend, estimate_once, EstimateTrace, EstimatorConfig, StepRule};
pub use geometry::{Point, SensorArray};
pub use harness::{run_experiment, ExperimentResult, ExperimentSpec};
pub use likelihood::LikelihoodContext;
pub use model::{Measurement, NoiseParams, SourceParams};
pub use oracle::{grid_argmax, verify_uniqueness, GridSpec};
pub use rng::{stream_from_seed, RandomStream};
