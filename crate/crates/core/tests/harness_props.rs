//! Properties of the trial harness and its reports.

use estent_core::channels::Channel;
use estent_core::coding::zoom::build_zoom_scheme;
use estent_core::harness::{evaluate, tail_window_start, DirectQuantizer, ZoomEstimator};
use estent_core::systems::{catalog, SystemModel};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

fn system(name: &str, params: Value) -> SystemModel {
    catalog(name, params.as_object().unwrap_or(&Map::new())).unwrap()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reports_are_ordered_and_bounded(rate in 1u32..6, p in 0.0f64..0.8, eps in 1e-4f64..1.0, seed in any::<u64>()) {
        let s = system("linear", json!({"A": [[1.8]]}));
        let channel = Channel::erasure(2, p).unwrap();
        let scheme = ZoomEstimator(build_zoom_scheme(&[1.8], &[rate], p, &[1.0]).unwrap());
        let r = evaluate(&s, &channel, &scheme, eps, 20, 200, seed).unwrap();
        prop_assert!(r.e1_pass_fraction <= r.e2_pass_fraction);
        prop_assert!((0.0..=1.0).contains(&r.e1_pass_fraction) && (0.0..=1.0).contains(&r.e2_pass_fraction));
        prop_assert!(r.e3_tail_mse >= 0.0);
        if r.e1_pass_fraction == 1.0 {
            prop_assert!(r.e3_tail_mse <= eps * eps);
        }
        prop_assert_eq!(r.window_start, tail_window_start(200));
    }

    #[test]
    fn direct_quantizer_reports_are_ordered(levels in 2usize..64, p in 0.0f64..0.5, seed in any::<u64>()) {
        let s = system("rotation_noise", json!({"alpha": 0.2, "noise": {"kind": "uniform", "width": 0.05}}));
        let channel = Channel::erasure(4, p).unwrap();
        let scheme = DirectQuantizer { levels, low: 0.0, high: 1.0 };
        let r = evaluate(&s, &channel, &scheme, 0.05, 16, 100, seed).unwrap();
        prop_assert!(r.e1_pass_fraction <= r.e2_pass_fraction);
        if r.e1_pass_fraction == 1.0 {
            prop_assert!(r.e3_tail_mse <= 0.05 * 0.05);
        }
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let s = system("rotation_noise", json!({"alpha": 0.1, "noise": {"kind": "gaussian", "variance": 0.001}}));
    let channel = Channel::bsc(0.02).unwrap();
    let scheme = DirectQuantizer { levels: 64, low: 0.0, high: 1.0 };
    let reports: Vec<_> = [1, 2, 5]
        .iter()
        .map(|t| pool(*t).install(|| evaluate(&s, &channel, &scheme, 0.02, 64, 300, 77).unwrap()))
        .collect();
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn tail_window_is_the_final_fifth() {
    assert_eq!(tail_window_start(2000), 1600);
    assert_eq!(tail_window_start(3000), 2400);
    assert_eq!(tail_window_start(4), 3);
}
