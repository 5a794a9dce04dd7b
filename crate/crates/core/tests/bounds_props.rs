//! Properties of the analytic bounds.

use estent_core::bounds::{
    ar_rate_distortion, gl_capacity_upper, linear_entropy, log_grid, shannon_divergence_threshold,
    shannon_lower_bound, zoom_capacity_upper,
};
use estent_core::coding::quantizer::{build_memoryless_quantizer_with, RangeRule};
use estent_core::rng::rng_from_seed;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn linear_entropy_is_below_the_zoom_bound(
        spectrum in prop::collection::vec((0.0f64..9.0, 0.0f64..std::f64::consts::TAU), 1..6),
    ) {
        let eigs: Vec<Complex64> = spectrum.iter().map(|(r, a)| Complex64::from_polar(*r, *a)).collect();
        let ha = linear_entropy(&eigs, &vec![1; eigs.len()]).unwrap();
        prop_assert!(ha <= zoom_capacity_upper(&eigs) + 1e-12);
    }

    #[test]
    fn ar_curve_is_monotone_in_theta(coeffs in prop::collection::vec(-2.5f64..2.5, 1..4), sigma2 in 0.1f64..4.0) {
        let points: Vec<_> = log_grid(1e-3, 10.0, 12)
            .into_iter()
            .map(|theta| ar_rate_distortion(&coeffs, sigma2, theta, 2048).unwrap())
            .collect();
        for w in points.windows(2) {
            prop_assert!(w[1].rate_bits <= w[0].rate_bits + 1e-12);
            prop_assert!(w[1].distortion >= w[0].distortion - 1e-12);
        }
    }

    #[test]
    fn shannon_bound_exceeds_any_level_below_its_threshold(h in -5.0f64..10.0, dim in 1usize..4, level in 0.0f64..60.0) {
        let eps = shannon_divergence_threshold(h, dim, level);
        prop_assert!(shannon_lower_bound(h, dim, eps * 0.999).unwrap() > level);
        prop_assert!(shannon_lower_bound(h, dim, eps).unwrap() <= level + 1e-9);
    }
}

#[test]
fn doubling_quadrature_nodes_changes_little() {
    let mut rng = rng_from_seed(41);
    for _ in 0..20 {
        let m = rng.random_range(1..=4);
        let coeffs: Vec<f64> = (0..m).map(|_| rng.random_range(-0.9..0.9) / m as f64).collect();
        for theta in [0.05, 0.5] {
            let a = ar_rate_distortion(&coeffs, 1.0, theta, 8192).unwrap();
            let b = ar_rate_distortion(&coeffs, 1.0, theta, 16384).unwrap();
            assert!((a.rate_bits - b.rate_bits).abs() < 1e-6, "{coeffs:?} theta {theta}");
            assert!((a.distortion - b.distortion).abs() < 1e-6, "{coeffs:?} theta {theta}");
        }
    }
}

#[test]
fn inverted_uniform_quantizer_distortion_gives_its_rate() {
    let mut rng = rng_from_seed(42);
    let sample: Vec<f64> = (0..1_000_000).map(|_| rng.random::<f64>()).collect();
    for n in [256usize, 512, 1024] {
        let q = build_memoryless_quantizer_with(&sample, n, RangeRule::Full).unwrap();
        let rate = gl_capacity_upper(1.0, 1, q.measured_distortion, 1.0 / 12.0).unwrap();
        assert!((rate - (n as f64).log2()).abs() < 0.05, "n={n}: {rate}");
    }
}
