//! Cross-module invariants: the grid oracle against the gradient-ascent
//! estimator, stationarity structure at converged points, and
//! finite-difference self-consistency on the actual objective.

use radloc::estimator::{ascend, EstimatorConfig, FixedCounts, TerminationReason};
use radloc::geometry::{random_array, sample_interior, SensorArray};
use radloc::likelihood::{intensity_mle, profit_gradient, xi_coefficients, LikelihoodContext};
use radloc::model::{mean_rates, SourceParams};
use radloc::oracle::{distinct_maxima, finite_difference_gradient, grid_argmax, GridSpec};
use radloc::rng::stream_from_seed;

fn noise_free_setup(
    dim: usize,
    seed: u64,
) -> (SensorArray, SourceParams, Vec<f64>) {
    let mut rng = stream_from_seed(seed);
    let array = random_array(dim, 200.0, &mut rng).unwrap();
    let y_star = sample_interior(&array, &mut rng);
    let source = SourceParams::new(y_star, 5e7, 0.0068).unwrap();
    let counts = mean_rates(&source, &array).unwrap();
    (array, source, counts)
}

#[test]
fn estimator_agrees_with_grid_oracle() {
    // Noise-free: the ascent's converged point and the refined grid argmax
    // land within one lattice spacing of each other (both at the source).
    let mut config_seed = 0u64;
    for trial in 0..100u64 {
        let dim = 2 + (trial % 2) as usize;
        let (array, source, counts) = noise_free_setup(dim, 5000 + trial);
        let resolution = if dim == 2 { 80 } else { 40 };
        let grid = GridSpec::with_resolution(resolution).unwrap();
        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        let census = grid_argmax(&ctx, &grid).unwrap();
        let maxima = distinct_maxima(&ctx, &census, &grid);
        assert_eq!(maxima.interior.len(), 1, "trial {trial}");
        let oracle_point = maxima.interior[0];

        config_seed += 1;
        let mut rng = stream_from_seed(9000 + config_seed);
        let y0 = sample_interior(&array, &mut rng);
        // Ridge-shaped objectives make the line search zigzag; the cap is
        // generous so every noise-free run terminates by tolerance.
        let config = EstimatorConfig {
            resample_each_iteration: false,
            max_iterations: 200_000,
            ..EstimatorConfig::backtracking(0)
        };
        let mut provider = FixedCounts(counts.clone());
        let trace = ascend(&array, 0.0068, &mut provider, &config, &y0, &mut rng).unwrap();
        assert_eq!(
            trace.termination,
            TerminationReason::Converged,
            "trial {trial} did not converge"
        );

        let spacing = grid.lattice_spacing(&array);
        let gap = trace.final_estimate.distance(&oracle_point);
        assert!(
            gap <= spacing,
            "trial {trial}: estimator/oracle gap {gap} > spacing {spacing}"
        );
        // Both sit on the true source.
        assert!(trace.final_estimate.distance(source.location()) <= spacing);
    }
}

#[test]
fn converged_points_are_stationary_with_null_coefficients() {
    // At a converged noise-free point the gradient coefficients recomputed
    // from their defining form are all zero to rounding: never all-positive
    // or all-negative.
    for trial in 0..20u64 {
        let dim = 1 + (trial % 3) as usize;
        let (array, _, counts) = noise_free_setup(dim, 300 + trial);
        let mut rng = stream_from_seed(40 + trial);
        let y0 = sample_interior(&array, &mut rng);
        let config = EstimatorConfig {
            resample_each_iteration: false,
            max_iterations: 200_000,
            ..EstimatorConfig::backtracking(0)
        };
        let mut provider = FixedCounts(counts.clone());
        let trace = ascend(&array, 0.0068, &mut provider, &config, &y0, &mut rng).unwrap();

        let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
        let y = trace.final_estimate;
        let a_hat = intensity_mle(&ctx, &y).unwrap();
        let grad = profit_gradient(&ctx, &y, a_hat).unwrap();
        let count_scale: f64 = counts.iter().sum();
        assert!(
            grad.norm() <= 1e-6 * count_scale,
            "trial {trial}: gradient norm {} at converged point",
            grad.norm()
        );
        let xis = xi_coefficients(&ctx, &y, a_hat).unwrap();
        let xi_scale: f64 = xis.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(
            xis.iter().any(|x| *x <= 0.0) && xis.iter().any(|x| *x >= 0.0) || xi_scale == 0.0,
            "trial {trial}: coefficients one-signed: {xis:?}"
        );
        for xi in &xis {
            assert!(
                xi.abs() <= 1e-6 * count_scale,
                "trial {trial}: coefficient {xi} not ~0"
            );
        }
    }
}

#[test]
fn fd_error_halves_quadratically_on_likelihood() {
    // Against the exact analytic gradient, the central-difference error is
    // O(step^2): halving the step cuts the error by ~4.
    let (array, source, counts) = noise_free_setup(2, 777);
    let ctx = LikelihoodContext::new(&array, 0.0068, &counts).unwrap();
    let mut rng = stream_from_seed(778);
    let a = source.intensity() * 0.7;

    let mut checked = 0;
    while checked < 10 {
        let y = sample_interior(&array, &mut rng);
        let base_step = 1e-3 * array.diameter();
        if array
            .sensors()
            .iter()
            .any(|s| s.distance(&y) < 20.0 * base_step)
        {
            continue;
        }
        let exact = profit_gradient(&ctx, &y, a).unwrap();
        let err = |step: f64| {
            let fd = finite_difference_gradient(&ctx, &y, a, step).unwrap();
            fd.components()
                .iter()
                .zip(exact.components())
                .map(|(f, g)| (f - g).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err(base_step);
        let e2 = err(base_step / 2.0);
        // Skip points where the error is already at rounding level.
        if e1 < 1e-9 * exact.norm() {
            continue;
        }
        let ratio = e1 / e2;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "step-halving ratio {ratio} (errors {e1}, {e2})"
        );
        checked += 1;
    }
}
