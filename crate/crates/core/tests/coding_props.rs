//! Properties of the coding schemes.

use estent_core::channels::Channel;
use estent_core::coding::quantizer::{build_memoryless_quantizer_with, RangeRule};
use estent_core::coding::spanning::{build_spanning_scheme, run_spanning_scheme};
use estent_core::coding::zoom::{build_zoom_scheme, run_zoom_scheme};
use estent_core::rng::rng_from_seed;
use estent_core::systems::{catalog, SystemModel};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Map, Value};

fn system(name: &str, params: Value) -> SystemModel {
    catalog(name, params.as_object().unwrap_or(&Map::new())).unwrap()
}

fn diagonal(eigs: &[f64]) -> SystemModel {
    let rows: Vec<Vec<f64>> = (0..eigs.len())
        .map(|i| (0..eigs.len()).map(|j| if i == j { eigs[i] } else { 0.0 }).collect())
        .collect();
    system("linear", json!({ "A": rows }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zoom_brackets_the_state_and_follows_the_closed_form(
        eigs in prop::collection::vec(prop_oneof![-4.0f64..-0.2, 0.2f64..4.0], 1..4),
        rate in 1u32..8,
        p in 0.0f64..0.9,
        seed in any::<u64>(),
    ) {
        let n = eigs.len();
        let scheme = build_zoom_scheme(&eigs, &vec![rate; n], p, &vec![1.5; n]).unwrap();
        let channel = Channel::erasure(2, p).unwrap();
        let run = run_zoom_scheme(&scheme, &diagonal(&eigs), &channel, 300, seed);
        prop_assert!(run.is_ok(), "{:?}", run.err());
        let run = run.unwrap();
        for (i, eig) in eigs.iter().enumerate() {
            let mut successes = 0u32;
            for t in 0..run.erased[i].len() {
                if !run.erased[i][t] {
                    successes += 1;
                }
                let closed = 1.5f64.log2() + (t + 1) as f64 * eig.abs().log2() - f64::from(rate * successes);
                prop_assert!((run.log2_halfwidth[i][t + 1] - closed).abs() < 1e-9 * (t + 2) as f64);
            }
        }
    }
}

#[test]
fn spanning_scheme_is_accurate_and_causal_over_a_noiseless_channel() {
    let rotation = system("rotation_noise", json!({"alpha": 0.31, "noise": {"kind": "none"}}));
    let channel = Channel::noiseless(2).unwrap();
    let eps = 0.1;
    let scheme = build_spanning_scheme(&rotation, eps, &channel, 30, 3).unwrap();
    let horizon = scheme.horizon_range().end - 1;
    for seed in 0..20 {
        let run = run_spanning_scheme(&scheme, &channel, horizon, seed).unwrap();
        assert!(run.errors[run.lock_on..].iter().all(|e| *e <= eps));
        for (t, info) in run.info_horizon.iter().enumerate() {
            if let Some(read) = info {
                assert!(*read < t, "estimate at {t} read output {read}");
            }
        }
    }
}

#[test]
fn uniform_quantizer_distortion_falls_with_more_levels() {
    let mut rng = rng_from_seed(8);
    let uniform: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let gaussian: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    for (sample, rule) in [(&uniform, RangeRule::Full), (&gaussian, RangeRule::default())] {
        let d: Vec<f64> = (1..=128)
            .map(|n| build_memoryless_quantizer_with(sample, n, rule).unwrap().measured_distortion)
            .collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0]), "{rule:?}");
    }
}
