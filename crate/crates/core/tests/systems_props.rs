//! Properties of the system catalog and trajectory simulation.

use estent_core::systems::{catalog, orbit_distance, simulate, SystemModel};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

fn system(name: &str, params: Value) -> SystemModel {
    catalog(name, params.as_object().unwrap_or(&Map::new())).unwrap()
}

fn noisy_catalog() -> Vec<SystemModel> {
    vec![
        system("rotation_noise", json!({"alpha": 0.1})),
        system("rotation_noise", json!({"dim": 2, "noise": {"kind": "gaussian", "variance": 0.01}})),
        system("ar_gaussian", json!({"a": [-1.2, 0.3]})),
        system("linear", json!({"A": [[1.1, 0.2], [0.0, 0.7]], "noise": {"kind": "gaussian", "variance": 0.5}})),
        system("additive_nonlinear", json!({})),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equal_seeds_give_identical_blocks(which in 0usize..5, horizon in 1usize..200, seed in any::<u64>()) {
        let s = &noisy_catalog()[which];
        prop_assert_eq!(simulate(s, horizon, seed).unwrap(), simulate(s, horizon, seed).unwrap());
    }

    #[test]
    fn recorded_noise_replays_exactly(which in 0usize..5, horizon in 1usize..200, seed in any::<u64>()) {
        let s = &noisy_catalog()[which];
        prop_assert!(simulate(s, horizon, seed).unwrap().replays_exactly(s));
    }

    #[test]
    fn torus_distance_is_at_most_half(
        x in prop::collection::vec(-3.0f64..3.0, 2),
        y in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let s = system("cat_map", json!({}));
        let d = s.distance(&x, &y);
        prop_assert!((0.0..=0.5).contains(&d), "d = {}", d);
    }

    #[test]
    fn orbit_distance_is_monotone_in_n(x in 0.0f64..1.0, y in 0.0f64..1.0, seed in any::<u64>()) {
        let s = system("rotation_noise", json!({"noise": {"kind": "gaussian", "variance": 0.05}}));
        let path = s.sample_noise_path(20, &mut estent_core::rng::rng_from_seed(seed));
        let d: Vec<f64> = (1..=20).map(|n| orbit_distance(&s, &[x], &[y], n, &path).unwrap()).collect();
        prop_assert!(d.windows(2).all(|w| w[0] <= w[1]), "{:?}", d);
        let doubling = system("doubling", json!({}));
        let d: Vec<f64> = (1..=20).map(|n| orbit_distance(&doubling, &[x], &[y], n, &[]).unwrap()).collect();
        prop_assert!(d.windows(2).all(|w| w[0] <= w[1]), "{:?}", d);
    }
}

#[test]
fn torus_states_stay_in_unit_interval() {
    let s = system("rotation_noise", json!({"alpha": 0.3, "noise": {"kind": "gaussian", "variance": 4.0}}));
    let block = simulate(&s, 5000, 9).unwrap();
    assert!(block.states.iter().flatten().all(|v| (0.0..1.0).contains(v)));
}
