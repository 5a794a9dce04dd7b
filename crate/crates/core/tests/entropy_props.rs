//! Properties of the separated-set counts and rate estimates.

use estent_core::entropy::{
    count_separated, estimate_topological_entropy, estimate_topological_from_points, sample_points,
    separated_subset, EntropyGridSpec,
};
use estent_core::systems::{catalog, State, SystemModel};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

fn system(name: &str, params: Value) -> SystemModel {
    catalog(name, params.as_object().unwrap_or(&Map::new())).unwrap()
}

fn deterministic(which: usize) -> SystemModel {
    match which {
        0 => system("doubling", json!({})),
        1 => system("cat_map", json!({})),
        _ => system("rotation_noise", json!({"alpha": 0.2, "noise": {"kind": "none"}})),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counts_grow_with_n_and_shrink_with_epsilon(which in 0usize..3, seed in any::<u64>(), size in 50usize..600) {
        let s = deterministic(which);
        let pts = sample_points(&s, size, seed, true);
        let epsilons = [0.3, 0.2, 0.1, 0.05];
        for eps in epsilons {
            let counts: Vec<usize> = (1..=8).map(|n| count_separated(&s, &pts, n, eps, 0, None).unwrap()).collect();
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "eps {}: {:?}", eps, counts);
        }
        for n in [1usize, 3, 6] {
            let counts: Vec<usize> = epsilons.iter().map(|e| count_separated(&s, &pts, n, *e, 0, None).unwrap()).collect();
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "n {}: {:?}", n, counts);
        }
    }

    #[test]
    fn separated_set_covers_every_point(which in 0usize..3, seed in any::<u64>(), n in 1usize..7, eps in 0.02f64..0.4) {
        let s = deterministic(which);
        let pts = sample_points(&s, 800, seed, true);
        let centers = separated_subset(&s, &pts, n, eps, 0, None).unwrap();
        let orbits: Vec<Vec<State>> = pts.iter().map(|p| s.orbit(p, n - 1, &[]).unwrap()).collect();
        let bowen = |a: usize, b: usize| (0..n).map(|t| s.distance(&orbits[a][t], &orbits[b][t])).fold(0.0, f64::max);
        for p in 0..pts.len() {
            prop_assert!(centers.iter().any(|&c| bowen(p, c) <= eps), "point {} uncovered", p);
        }
        for (i, &a) in centers.iter().enumerate() {
            for &b in &centers[i + 1..] {
                prop_assert!(bowen(a, b) > eps);
            }
        }
    }
}

#[test]
fn separated_set_covers_five_thousand_points() {
    let s = deterministic(1);
    let pts = sample_points(&s, 5000, 4, true);
    let (n, eps) = (5, 0.1);
    let centers = separated_subset(&s, &pts, n, eps, 0, None).unwrap();
    let orbits: Vec<Vec<State>> = pts.iter().map(|p| s.orbit(p, n - 1, &[]).unwrap()).collect();
    for o in &orbits {
        let covered = centers
            .iter()
            .any(|&c| (0..n).all(|t| s.distance(&o[t], &orbits[c][t]) <= eps));
        assert!(covered);
    }
}

fn small_grid() -> EntropyGridSpec {
    EntropyGridSpec {
        epsilons: vec![0.25, 0.125, 0.0625],
        horizons: (1..=10).collect(),
        sample_size: 8000,
        ..EntropyGridSpec::default()
    }
}

#[test]
fn offset_rate_agrees_with_plain_rate() {
    let s = deterministic(0);
    let grid = EntropyGridSpec {
        horizons: (2..=11).collect(),
        ..small_grid()
    };
    let base = estimate_topological_entropy(&s, &grid, 3).unwrap();
    let shifted = estimate_topological_entropy(&s, &EntropyGridSpec { offset: 1, ..grid.clone() }, 3).unwrap();
    let mut compared = 0;
    for (a, b) in base.fits.iter().zip(&shifted.fits) {
        if let (Some(a), Some(b)) = (a, b) {
            assert!((a.slope - b.slope).abs() <= 0.1, "{} vs {}", a.slope, b.slope);
            compared += 1;
        }
    }
    assert!(compared >= 2);
}

#[test]
fn doubling_rate_is_invariant_under_rotated_sample() {
    let s = deterministic(0);
    let grid = small_grid();
    let pts = sample_points(&s, grid.sample_size, 5, true);
    let rotated: Vec<State> = pts.iter().map(|p| vec![(p[0] + 0.37).rem_euclid(1.0)]).collect();
    let a = estimate_topological_from_points(&s, &grid, &pts).unwrap().extrapolated_rate;
    let b = estimate_topological_from_points(&s, &grid, &rotated).unwrap().extrapolated_rate;
    assert!((a - b).abs() <= 0.05, "{a} vs {b}");
}

#[test]
fn rates_are_log2_count_over_n() {
    let s = deterministic(1);
    let est = estimate_topological_entropy(&s, &small_grid(), 6).unwrap();
    for (i, row) in est.counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let n = est.grid.horizons[j] as f64;
            assert_eq!(est.rates[i][j], (*c as f64).log2() / n);
        }
    }
}
