//! The emission and measurement model.
//!
//! A point source of intensity `A` at location `y*` produces a mean count
//! rate at distance `d` of
//!
//! ```text
//! lambda(d) = A exp(-alpha d) / d^2
//! ```
//!
//! (inverse-square spreading with exponential attenuation), strictly
//! decreasing in `d` for `alpha >= 0`. Each sensor reports a Poisson count
//! whose mean is the signal rate plus a background term: summing a Poisson
//! signal and a Poisson background is distributionally identical to a single
//! Poisson draw with the summed mean, so that is what the sampler does.
//!
//! Distances are dimensionless grid units; intensities carry
//! counts x distance^2.

use serde::Serialize;

use crate::geometry::{GeometryError, Point, SensorArray};
use crate::poisson::{self, PoissonError};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("source intensity must be positive and finite, got {0}")]
    BadIntensity(f64),
    #[error("attenuation must be nonnegative and finite, got {0}")]
    BadAttenuation(f64),
    #[error("sensor coincides with the source location")]
    SingularDistance,
    #[error("distance must be positive, got {0}")]
    BadDistance(f64),
    #[error("background means must be nonnegative and finite")]
    BadBackground,
    #[error("background length {got} does not match sensor count {expected}")]
    BackgroundLength { expected: usize, got: usize },
    #[error("total background is zero: SNR is infinite")]
    InfiniteSnr,
    #[error("count vector length {got} does not match sensor count {expected}")]
    CountLength { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

/// True source parameters: location `y*`, intensity `A* > 0`, attenuation
/// `alpha >= 0` (homogeneous across sensors).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceParams {
    location: Point,
    intensity: f64,
    attenuation: f64,
}

impl SourceParams {
    pub fn new(location: Point, intensity: f64, attenuation: f64) -> Result<Self, ModelError> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(ModelError::BadIntensity(intensity));
        }
        if !(attenuation.is_finite() && attenuation >= 0.0) {
            return Err(ModelError::BadAttenuation(attenuation));
        }
        Ok(Self {
            location,
            intensity,
            attenuation,
        })
    }

    pub fn location(&self) -> &Point {
        &self.location
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn attenuation(&self) -> f64 {
        self.attenuation
    }
}

/// Mean background count per sensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseParams {
    background_means: Vec<f64>,
}

impl NoiseParams {
    pub fn new(background_means: Vec<f64>) -> Result<Self, ModelError> {
        if background_means
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(ModelError::BadBackground);
        }
        Ok(Self { background_means })
    }

    /// Homogeneous background: the same mean at every sensor. The paper
    /// never states per-sensor levels, so this is the default form.
    pub fn homogeneous(sensor_count: usize, mean: f64) -> Result<Self, ModelError> {
        Self::new(vec![mean; sensor_count])
    }

    /// Zero background everywhere.
    pub fn zero(sensor_count: usize) -> Self {
        Self {
            background_means: vec![0.0; sensor_count],
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.background_means
    }

    pub fn total(&self) -> f64 {
        self.background_means.iter().sum()
    }

    fn check_len(&self, array: &SensorArray) -> Result<(), ModelError> {
        if self.background_means.len() != array.len() {
            return Err(ModelError::BackgroundLength {
                expected: array.len(),
                got: self.background_means.len(),
            });
        }
        Ok(())
    }
}

/// One vector of observed gamma-ray counts, one entry per sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Measurement {
    counts: Vec<u64>,
}

impl Measurement {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn as_real(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Signal mean count at `sensor` from `source`: `A exp(-alpha d) / d^2`.
pub fn mean_rate(source: &SourceParams, sensor: &Point) -> Result<f64, ModelError> {
    let d = sensor.distance(source.location());
    if d == 0.0 {
        return Err(ModelError::SingularDistance);
    }
    Ok(mean_rate_at_distance(
        source.intensity(),
        source.attenuation(),
        d,
    ))
}

pub(crate) fn mean_rate_at_distance(intensity: f64, attenuation: f64, d: f64) -> f64 {
    intensity * (-attenuation * d).exp() / (d * d)
}

/// Signal means at every sensor of the array.
pub fn mean_rates(source: &SourceParams, array: &SensorArray) -> Result<Vec<f64>, ModelError> {
    array
        .sensors()
        .iter()
        .map(|s| mean_rate(source, s))
        .collect()
}

/// d lambda / d d: `-lambda(d) (alpha + 2/d)`. Strictly negative for every
/// positive distance and nonnegative attenuation, so the rate is strictly
/// decreasing. (Central differences of [`mean_rate`] pin this form; it is
/// also the one the likelihood gradient coefficients factor through.)
pub fn mean_rate_gradient_d(source: &SourceParams, d: f64) -> Result<f64, ModelError> {
    if !(d.is_finite() && d > 0.0) {
        return Err(ModelError::BadDistance(d));
    }
    let z = mean_rate_at_distance(source.intensity(), source.attenuation(), d);
    Ok(-z * (source.attenuation() + 2.0 / d))
}

/// Draw one measurement: each sensor's count is Poisson with mean
/// `lambda_i* + w_i`. Deterministic under a fixed stream.
pub fn sample_measurement(
    source: &SourceParams,
    array: &SensorArray,
    noise: &NoiseParams,
    rng: &mut RandomStream,
) -> Result<Measurement, ModelError> {
    noise.check_len(array)?;
    let mut counts = Vec::with_capacity(array.len());
    for (sensor, w) in array.sensors().iter().zip(noise.means()) {
        let mean = mean_rate(source, sensor)? + w;
        counts.push(poisson::sample(mean, rng)?);
    }
    Ok(Measurement::new(counts))
}

/// SNR in dB: `10 log10( (A / sum w_i) * sum exp(-alpha d_i)/d_i^2 )`.
pub fn snr_db(
    source: &SourceParams,
    array: &SensorArray,
    noise: &NoiseParams,
) -> Result<f64, ModelError> {
    noise.check_len(array)?;
    let w_total = noise.total();
    if w_total == 0.0 {
        return Err(ModelError::InfiniteSnr);
    }
    let signal_total: f64 = mean_rates(source, array)?.iter().sum();
    Ok(10.0 * (signal_total / w_total).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SensorArray;
    use crate::rng::{stream_from_seed, uniform};
    use approx::assert_relative_eq;

    fn array_3d() -> SensorArray {
        SensorArray::from_coords(&[
            vec![0.0, 0.0, 0.0],
            vec![200.0, 0.0, 0.0],
            vec![0.0, 200.0, 0.0],
            vec![0.0, 0.0, 100.0],
        ])
        .unwrap()
    }

    fn array_2d() -> SensorArray {
        SensorArray::from_coords(&[vec![0.0, 0.0], vec![200.0, 0.0], vec![50.0, 200.0]]).unwrap()
    }

    fn source_3d() -> SourceParams {
        SourceParams::new(Point::new(&[10.0, 20.0, 10.0]).unwrap(), 5e7, 0.0068).unwrap()
    }

    fn source_2d() -> SourceParams {
        SourceParams::new(Point::new(&[120.0, 40.0]).unwrap(), 5e7, 0.0068).unwrap()
    }

    #[test]
    fn unit_case() {
        let source = SourceParams::new(Point::scalar(0.0).unwrap(), 1.0, 0.0).unwrap();
        assert_relative_eq!(
            mean_rate(&source, &Point::scalar(1.0).unwrap()).unwrap(),
            1.0
        );
    }

    #[test]
    fn three_d_far_sensor_rates() {
        // The three sensors away from the origin: printed values 372, 449,
        // 3095 to the nearest integer.
        let source = source_3d();
        let rates = mean_rates(&source, &array_3d()).unwrap();
        assert_eq!(rates[1].round() as i64, 372);
        assert_eq!(rates[2].round() as i64, 449);
        assert_eq!(rates[3].round() as i64, 3095);
    }

    #[test]
    fn two_d_rates_from_formula() {
        // Direct evaluation, frozen from an independent script. The printed
        // vector (1276, 3192, 490) is 2-7% away from the formula; the
        // formula is authoritative here.
        let rates = mean_rates(&source_2d(), &array_2d()).unwrap();
        let expected = [1322.197016730414, 3402.025446696929, 499.93728243770283];
        for (r, e) in rates.iter().zip(expected) {
            assert_relative_eq!(*r, e, max_relative = 1e-12);
        }
    }

    #[test]
    fn source_on_sensor_is_singular() {
        let source =
            SourceParams::new(Point::new(&[200.0, 0.0]).unwrap(), 5e7, 0.0068).unwrap();
        assert_eq!(
            mean_rate(&source, &Point::new(&[200.0, 0.0]).unwrap()).unwrap_err(),
            ModelError::SingularDistance
        );
    }

    #[test]
    fn invalid_params_rejected() {
        let p = Point::scalar(0.5).unwrap();
        assert!(SourceParams::new(p, 0.0, 0.0).is_err());
        assert!(SourceParams::new(p, -1.0, 0.0).is_err());
        assert!(SourceParams::new(p, 1.0, -0.1).is_err());
        assert!(NoiseParams::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn gradient_unit_case_and_sign() {
        let source = SourceParams::new(Point::scalar(0.0).unwrap(), 1.0, 0.0).unwrap();
        assert_relative_eq!(mean_rate_gradient_d(&source, 1.0).unwrap(), -2.0);
        assert!(mean_rate_gradient_d(&source, 0.0).is_err());

        let mut rng = stream_from_seed(4);
        for _ in 0..1000 {
            let source = SourceParams::new(
                Point::scalar(0.0).unwrap(),
                1e8 * uniform(&mut rng) + 1.0,
                0.05 * uniform(&mut rng),
            )
            .unwrap();
            let d = 500.0 * uniform(&mut rng) + 1e-3;
            assert!(mean_rate_gradient_d(&source, d).unwrap() < 0.0);
        }
    }

    #[test]
    fn rate_strictly_decreasing() {
        let source = source_3d();
        let mut rng = stream_from_seed(8);
        for _ in 0..10_000 {
            let a = 500.0 * uniform(&mut rng) + 1e-3;
            let b = 500.0 * uniform(&mut rng) + 1e-3;
            let (d1, d2) = if a < b { (a, b) } else { (b, a) };
            if d1 == d2 {
                continue;
            }
            let z1 = mean_rate_at_distance(source.intensity(), source.attenuation(), d1);
            let z2 = mean_rate_at_distance(source.intensity(), source.attenuation(), d2);
            assert!(z1 > z2, "rate not decreasing: ({d1}, {z1}) vs ({d2}, {z2})");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let source = source_3d();
        let mut check = |d: f64| {
            let h = 1e-4 * d;
            let f = |x: f64| mean_rate_at_distance(source.intensity(), source.attenuation(), x);
            let fd = (f(d + h) - f(d - h)) / (2.0 * h);
            let analytic = mean_rate_gradient_d(&source, d).unwrap();
            assert_relative_eq!(analytic, fd, max_relative = 1e-6);
        };
        check(89.44);
        let mut rng = stream_from_seed(12);
        for _ in 0..200 {
            check(1.0 + 499.0 * uniform(&mut rng));
        }
    }

    #[test]
    fn sample_means_track_rates() {
        // Law of large numbers at the 3-D configuration's noise-free rates.
        let array = array_3d();
        let source = source_3d();
        let noise = NoiseParams::zero(array.len());
        let rates = mean_rates(&source, &array).unwrap();
        let n = 10_000usize;
        let mut sums = vec![0.0f64; array.len()];
        let mut rng = stream_from_seed(77);
        for _ in 0..n {
            let m = sample_measurement(&source, &array, &noise, &mut rng).unwrap();
            for (s, c) in sums.iter_mut().zip(m.counts()) {
                *s += *c as f64;
            }
        }
        for (s, lambda) in sums.iter().zip(&rates) {
            let mean = s / n as f64;
            let bound = 3.0 * lambda.sqrt() / (n as f64).sqrt();
            assert!(
                (mean - lambda).abs() <= bound,
                "sample mean {mean} vs rate {lambda} (bound {bound})"
            );
        }
    }

    #[test]
    fn zero_mean_gives_zero_counts() {
        // A source so attenuated the rate underflows, plus zero background.
        let array = array_1d_tiny();
        let source =
            SourceParams::new(Point::scalar(0.25).unwrap(), 1e-300, 0.0).unwrap();
        let noise = NoiseParams::zero(array.len());
        let mut rng = stream_from_seed(5);
        for _ in 0..50 {
            let m = sample_measurement(&source, &array, &noise, &mut rng).unwrap();
            // means ~1e-299: effectively zero draws throughout
            assert!(m.counts().iter().all(|&c| c <= 1));
        }
    }

    fn array_1d_tiny() -> SensorArray {
        SensorArray::from_coords(&[vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn sampling_deterministic() {
        let array = array_2d();
        let source = source_2d();
        let noise = NoiseParams::homogeneous(array.len(), 40.0).unwrap();
        let mut a = stream_from_seed(99);
        let mut b = stream_from_seed(99);
        for _ in 0..100 {
            assert_eq!(
                sample_measurement(&source, &array, &noise, &mut a).unwrap(),
                sample_measurement(&source, &array, &noise, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn mean_overflow_is_configuration_error() {
        let array = array_1d_tiny();
        let source = SourceParams::new(Point::scalar(0.5).unwrap(), 1e17, 0.0).unwrap();
        let noise = NoiseParams::zero(array.len());
        let mut rng = stream_from_seed(1);
        assert!(matches!(
            sample_measurement(&source, &array, &noise, &mut rng).unwrap_err(),
            ModelError::Poisson(PoissonError::MeanOverflow(_))
        ));
    }

    #[test]
    fn snr_closed_form_cases() {
        let array = array_2d();
        let source = source_2d();
        let signal_total: f64 = mean_rates(&source, &array).unwrap().iter().sum();

        let at_signal = NoiseParams::homogeneous(array.len(), signal_total / 3.0).unwrap();
        assert_relative_eq!(
            snr_db(&source, &array, &at_signal).unwrap(),
            0.0,
            epsilon = 1e-9
        );

        let tenth = NoiseParams::homogeneous(array.len(), 0.1 * signal_total / 3.0).unwrap();
        assert_relative_eq!(
            snr_db(&source, &array, &tenth).unwrap(),
            10.0,
            epsilon = 1e-9
        );

        // Solve the background for 16.5 dB and round-trip it.
        let w_total = signal_total * 10f64.powf(-16.5 / 10.0);
        let solved = NoiseParams::homogeneous(array.len(), w_total / 3.0).unwrap();
        assert_relative_eq!(
            snr_db(&source, &array, &solved).unwrap(),
            16.5,
            epsilon = 1e-9
        );

        assert_eq!(
            snr_db(&source, &array, &NoiseParams::zero(array.len())).unwrap_err(),
            ModelError::InfiniteSnr
        );
    }

    #[test]
    fn snr_invariant_under_joint_scaling() {
        let array = array_2d();
        let location = Point::new(&[120.0, 40.0]).unwrap();
        let noise = NoiseParams::homogeneous(array.len(), 40.0).unwrap();
        let base = snr_db(
            &SourceParams::new(location, 5e7, 0.0068).unwrap(),
            &array,
            &noise,
        )
        .unwrap();
        for c in [0.1, 3.0, 1e4] {
            let scaled_noise =
                NoiseParams::homogeneous(array.len(), 40.0 * c).unwrap();
            let scaled = snr_db(
                &SourceParams::new(location, 5e7 * c, 0.0068).unwrap(),
                &array,
                &scaled_noise,
            )
            .unwrap();
            assert_relative_eq!(base, scaled, epsilon = 1e-9);
        }
    }
}
