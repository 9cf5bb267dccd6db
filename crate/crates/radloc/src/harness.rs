//! Monte-Carlo experiment engine: RMSE-vs-SNR sweeps, per-iteration
//! convergence curves, and hull-escape statistics.
//!
//! Each run owns a random stream whose seed derives from the master seed and
//! the global run index, so results are identical no matter how the worker
//! pool schedules them. Run outcomes merge by order-preserving collection
//! followed by a sequential reduction.

use rayon::prelude::*;
use serde::Serialize;

use crate::estimator::{self, EstimatorConfig, EstimatorError, TerminationReason};
use crate::geometry::{self, Point, SensorArray, MAX_DIM};
use crate::model::{self, ModelError, NoiseParams, SourceParams};
use crate::rng;

/// Salt mixed into the master seed for convergence-curve runs so they use a
/// seed namespace disjoint from the sweep runs.
const CURVE_SEED_SALT: u64 = 0x4355_5256_4531;

/// An experiment is allowed this fraction of degenerate-measurement runs
/// per SNR point before failing outright.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("{failures}/{runs} runs failed at {snr_db} dB (more than 1%)")]
    TooManyFailures {
        failures: usize,
        runs: usize,
        snr_db: f64,
    },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Monte-Carlo sweep definition.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub array: SensorArray,
    pub source: SourceParams,
    /// Background means are solved from the SNR formula at each point.
    pub snr_points_db: Vec<f64>,
    pub runs_per_point: usize,
    pub estimator: EstimatorConfig,
    pub master_seed: u64,
    /// When set, a per-iteration RMSE curve is produced at this SNR.
    pub curve_snr_db: Option<f64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs_per_point == 0 {
            return Err(HarnessError::InvalidSpec(
                "runs_per_point must be at least 1".into(),
            ));
        }
        if self.snr_points_db.is_empty() {
            return Err(HarnessError::InvalidSpec("snr_points empty".into()));
        }
        if self.snr_points_db.iter().any(|s| !s.is_finite()) {
            return Err(HarnessError::InvalidSpec("non-finite SNR point".into()));
        }
        if !geometry::contains_open(&self.array, self.source.location())
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?
        {
            return Err(HarnessError::InvalidSpec(
                "source is not interior to the sensor hull".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.array.dim()
    }

    /// The default SNR grid: -10 dB to +20 dB in 3 dB steps.
    pub fn default_snr_grid() -> Vec<f64> {
        (0..=10).map(|i| -10.0 + 3.0 * i as f64).collect()
    }
}

/// Aggregates for one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrPointResult {
    pub snr_db: f64,
    pub rmse: f64,
    pub mean_estimate: Point,
    /// Escaped iterations over total iterations across completed runs.
    pub escape_fraction: f64,
    pub runs: usize,
    pub failures: usize,
}

/// Full sweep output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub per_snr: Vec<SnrPointResult>,
    /// `(k, rmse_k)` at the designated SNR, when requested.
    pub curve: Option<Vec<(usize, f64)>>,
}

/// Fraction of the curvature stability bound used by
/// [`reference_step_size`].
pub const STEP_STABILITY_FRACTION: f64 = 0.05;

/// Constant step size for paper-style fixed-step experiments:
/// `mu = 0.05 / L` with `L = max_i lambda_i* (alpha + 2/d_i*)^2`, the
/// largest per-sensor curvature of the noise-free objective at the source.
///
/// Plain gradient ascent is stable for `mu < 2/L`; a twentieth of that
/// bound keeps the recursion in the small-step averaging regime the
/// constant-step methodology implies (the printed step constant is
/// dimensionally inconsistent with the gradient scale this model
/// produces, so the regime is reproduced rather than the number).
pub fn reference_step_size(
    array: &SensorArray,
    source: &SourceParams,
) -> Result<f64, HarnessError> {
    let rates = model::mean_rates(source, array)?;
    let curvature = array
        .sensors()
        .iter()
        .zip(&rates)
        .map(|(s, lambda)| {
            let d = s.distance(source.location());
            lambda * (source.attenuation() + 2.0 / d).powi(2)
        })
        .fold(0.0f64, f64::max);
    Ok(STEP_STABILITY_FRACTION / curvature)
}

/// Homogeneous background solved from the SNR formula:
/// `sum w_i = A * sum_i exp(-alpha d_i)/d_i^2 * 10^(-target/10)`.
pub fn solve_noise_for_snr(
    array: &SensorArray,
    source: &SourceParams,
    target_db: f64,
) -> Result<NoiseParams, HarnessError> {
    if !target_db.is_finite() {
        return Err(HarnessError::InvalidSpec(format!(
            "target SNR must be finite, got {target_db}"
        )));
    }
    let signal_total: f64 = model::mean_rates(source, array)?.iter().sum();
    let w_total = signal_total * 10f64.powf(-target_db / 10.0);
    Ok(NoiseParams::homogeneous(array.len(), w_total / array.len() as f64)?)
}

struct RunSuccess {
    error: f64,
    final_estimate: Point,
    escaped: usize,
    iterations: usize,
}

fn single_run(
    spec: &ExperimentSpec,
    noise: &NoiseParams,
    seed: u64,
) -> Result<Option<RunSuccess>, HarnessError> {
    let mut rng = rng::stream_from_seed(seed);
    match estimator::estimate_once(&spec.source, &spec.array, noise, &spec.estimator, &mut rng) {
        Ok(trace) => {
            if trace.termination == TerminationReason::DegenerateMeasurement {
                return Ok(None);
            }
            Ok(Some(RunSuccess {
                error: trace.final_estimate.distance(spec.source.location()),
                final_estimate: trace.final_estimate,
                escaped: trace.escaped_iterations(),
                iterations: trace.iterates.len(),
            }))
        }
        Err(EstimatorError::DegenerateMeasurement) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Execute the sweep: `runs_per_point` independent estimations per SNR
/// point, each with a seed derived from the master seed and the global run
/// index. Degenerate-measurement runs are recorded as failures and excluded
/// from the statistics; a point fails the experiment only when more than 1%
/// of its runs fail.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, HarnessError> {
    spec.validate()?;
    let runs = spec.runs_per_point;
    let mut per_snr = Vec::with_capacity(spec.snr_points_db.len());

    for (point_idx, &snr_db) in spec.snr_points_db.iter().enumerate() {
        let noise = solve_noise_for_snr(&spec.array, &spec.source, snr_db)?;
        let outcomes: Vec<Option<RunSuccess>> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let seed = rng::derive_seed(spec.master_seed, (point_idx * runs + r) as u64);
                single_run(spec, &noise, seed)
            })
            .collect::<Result<_, _>>()?;

        let failures = outcomes.iter().filter(|o| o.is_none()).count();
        if failures as f64 > MAX_FAILURE_FRACTION * runs as f64 {
            return Err(HarnessError::TooManyFailures {
                failures,
                runs,
                snr_db,
            });
        }

        let mut sq_sum = 0.0f64;
        let mut mean = [0.0f64; MAX_DIM];
        let mut escaped = 0usize;
        let mut iterations = 0usize;
        let mut completed = 0usize;
        for s in outcomes.iter().flatten() {
            sq_sum += s.error * s.error;
            for (m, c) in mean.iter_mut().zip(s.final_estimate.coords()) {
                *m += c;
            }
            escaped += s.escaped;
            iterations += s.iterations;
            completed += 1;
        }
        let dim = spec.dim();
        for m in mean.iter_mut() {
            *m /= completed as f64;
        }
        per_snr.push(SnrPointResult {
            snr_db,
            rmse: (sq_sum / completed as f64).sqrt(),
            mean_estimate: Point::new(&mean[..dim]).expect("finite mean"),
            escape_fraction: escaped as f64 / iterations as f64,
            runs,
            failures,
        });
    }

    let curve = match spec.curve_snr_db {
        Some(snr) => Some(convergence_curve(spec, snr)?),
        None => None,
    };

    Ok(ExperimentResult {
        name: spec.name.clone(),
        per_snr,
        curve,
    })
}

/// Per-iteration RMSE at one SNR: `rmse_k` over `runs_per_point` runs for
/// `k = 0 .. max_iterations-1`. Runs that terminated before `k` contribute
/// their final iterate. Uses a seed namespace disjoint from the sweep.
pub fn convergence_curve(
    spec: &ExperimentSpec,
    snr_db: f64,
) -> Result<Vec<(usize, f64)>, HarnessError> {
    spec.validate()?;
    let noise = solve_noise_for_snr(&spec.array, &spec.source, snr_db)?;
    let runs = spec.runs_per_point;
    let len = spec.estimator.max_iterations;

    let per_run: Vec<Option<Vec<f64>>> = (0..runs)
        .into_par_iter()
        .map(|r| -> Result<Option<Vec<f64>>, HarnessError> {
            let seed = rng::derive_seed(spec.master_seed ^ CURVE_SEED_SALT, r as u64);
            let mut rng = rng::stream_from_seed(seed);
            match estimator::estimate_once(
                &spec.source,
                &spec.array,
                &noise,
                &spec.estimator,
                &mut rng,
            ) {
                Ok(trace) => {
                    if trace.termination == TerminationReason::DegenerateMeasurement {
                        return Ok(None);
                    }
                    let errors: Vec<f64> = (0..len)
                        .map(|k| {
                            let idx = k.min(trace.iterates.len() - 1);
                            trace.iterates[idx].y.distance(spec.source.location())
                        })
                        .collect();
                    Ok(Some(errors))
                }
                Err(EstimatorError::DegenerateMeasurement) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<_, _>>()?;

    let failures = per_run.iter().filter(|o| o.is_none()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * runs as f64 {
        return Err(HarnessError::TooManyFailures {
            failures,
            runs,
            snr_db,
        });
    }
    let completed = runs - failures;

    Ok((0..len)
        .map(|k| {
            let sq: f64 = per_run
                .iter()
                .flatten()
                .map(|errs| errs[k] * errs[k])
                .sum();
            (k, (sq / completed as f64).sqrt())
        })
        .collect())
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Medians of consecutive windows; the trend statistic for convergence
/// curves.
pub fn windowed_medians(values: &[f64], window: usize) -> Vec<f64> {
    values
        .chunks(window)
        .map(|chunk| {
            let mut sorted = chunk.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted[sorted.len() / 2]
        })
        .collect()
}
