//! JSON config schemas, one per subcommand, versioned. Parsing is strict:
//! unknown fields are rejected and every error names the offending field
//! with its line and column.

use serde::Deserialize;

use radloc::estimator::{EstimatorConfig, StepRule};
use radloc::geometry::{Point, SensorArray};
use radloc::model::{NoiseParams, SourceParams};

use crate::CliError;

/// Schema version accepted by this binary.
pub const SCHEMA_VERSION: u32 = 1;

pub fn check_version(version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported config version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub location: Vec<f64>,
    pub intensity: f64,
    pub attenuation: f64,
}

impl SourceConfig {
    pub fn build(&self) -> Result<SourceParams, CliError> {
        let location = Point::new(&self.location)
            .map_err(|e| CliError::Config(format!("source.location: {e}")))?;
        SourceParams::new(location, self.intensity, self.attenuation)
            .map_err(|e| CliError::Config(format!("source: {e}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BackgroundConfig {
    /// The same mean at every sensor.
    Homogeneous(f64),
    /// One mean per sensor.
    PerSensor(Vec<f64>),
}

impl BackgroundConfig {
    pub fn build(&self, sensor_count: usize) -> Result<NoiseParams, CliError> {
        let noise = match self {
            BackgroundConfig::Homogeneous(w) => NoiseParams::homogeneous(sensor_count, *w),
            BackgroundConfig::PerSensor(ws) => NoiseParams::new(ws.clone()),
        };
        noise.map_err(|e| CliError::Config(format!("background: {e}")))
    }
}

pub fn build_array(sensors: &[Vec<f64>]) -> Result<SensorArray, CliError> {
    SensorArray::from_coords(sensors).map_err(|e| CliError::Config(format!("sensors: {e}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum StepConfig {
    Backtracking,
    Fixed(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub step: StepConfig,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_gradient_tolerance")]
    pub gradient_tolerance: f64,
    #[serde(default = "default_resample")]
    pub resample_each_iteration: bool,
    #[serde(default)]
    pub report_best_profit: bool,
    pub seed: u64,
}

fn default_max_iterations() -> usize {
    500
}

fn default_gradient_tolerance() -> f64 {
    radloc::estimator::DEFAULT_GRADIENT_TOL
}

fn default_resample() -> bool {
    true
}

impl EstimatorSection {
    pub fn build(&self, seed_override: Option<u64>) -> Result<EstimatorConfig, CliError> {
        if self.max_iterations == 0 {
            return Err(CliError::Config(
                "estimator.max_iterations must be at least 1".into(),
            ));
        }
        let step = match self.step {
            StepConfig::Backtracking => StepRule::Backtracking,
            StepConfig::Fixed(mu) => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(CliError::Config(format!(
                        "estimator.step.fixed must be positive, got {mu}"
                    )));
                }
                StepRule::Fixed(mu)
            }
        };
        Ok(EstimatorConfig {
            step,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            resample_each_iteration: self.resample_each_iteration,
            report_best_profit: self.report_best_profit,
            seed: seed_override.unwrap_or(self.seed),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub version: u32,
    pub sensors: Vec<Vec<f64>>,
    pub source: SourceConfig,
    pub background: BackgroundConfig,
    pub seed: u64,
    #[serde(default = "default_echo_source")]
    pub echo_source: bool,
}

fn default_echo_source() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub counts: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub version: u32,
    pub sensors: Vec<Vec<f64>>,
    pub attenuation: f64,
    /// Fixed-counts mode: real-valued counts given inline.
    pub measurement: Option<MeasurementSection>,
    /// Fixed-counts mode: counts read from a simulate output file.
    pub measurement_file: Option<String>,
    /// Live mode: draw fresh measurements from this source.
    pub source: Option<SourceConfig>,
    pub background: Option<BackgroundConfig>,
    pub estimator: EstimatorSection,
    pub initial_point: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub sensors: Vec<Vec<f64>>,
    pub source: SourceConfig,
    pub snr_points_db: Vec<f64>,
    pub runs_per_point: usize,
    pub estimator: EstimatorSection,
    pub master_seed: u64,
    #[serde(default)]
    pub curve_snr_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyUniqueConfig {
    pub version: u32,
    pub dim: usize,
    pub trials: usize,
    pub resolution: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub intensity: f64,
    pub attenuation: f64,
    pub seed: u64,
}

fn default_margin() -> f64 {
    radloc::oracle::DEFAULT_MARGIN
}

pub fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}
