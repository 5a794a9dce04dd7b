//! Properties of the channel models and capacities.

use estent_core::channels::{binary_entropy, blahut_arimoto, Channel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn general_capacity_is_nonnegative(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 2..5)) {
        let matrix: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let total: f64 = r.iter().sum();
                r.iter().map(|v| v / total).collect()
            })
            .collect();
        let c = Channel::general(matrix).unwrap().capacity().unwrap();
        prop_assert!(c >= 0.0 && c <= 3f64.log2() + 1e-9, "{}", c);
    }

    #[test]
    fn closed_forms_match_blahut_arimoto(p in 0.0f64..0.99, m in 2usize..6) {
        let bsc = Channel::bsc(p.min(0.5)).unwrap();
        let ba = blahut_arimoto(bsc.transition(), 1e-12, 100_000).unwrap();
        prop_assert!((ba.capacity - bsc.capacity().unwrap()).abs() < 1e-6);
        let erasure = Channel::erasure(m, p).unwrap();
        let ba = blahut_arimoto(erasure.transition(), 1e-12, 100_000).unwrap();
        prop_assert!((ba.capacity - erasure.capacity().unwrap()).abs() < 1e-6);
    }

    #[test]
    fn outputs_follow_transition_rows(p in 0.0f64..1.0, seed in any::<u64>()) {
        let ch = Channel::erasure(3, p).unwrap();
        let inputs: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let trace = ch.transmit(&inputs, seed).unwrap();
        prop_assert_eq!(trace.outputs.len(), inputs.len());
        for (x, y) in inputs.iter().zip(&trace.outputs) {
            prop_assert!(ch.transition()[*x][*y] > 0.0);
        }
    }
}

#[test]
fn noiseless_capacity_is_exact() {
    for m in 1..=64 {
        assert_eq!(Channel::noiseless(m).unwrap().capacity().unwrap(), (m as f64).log2());
    }
}

#[test]
fn bsc_capacity_decreases_towards_half() {
    let caps: Vec<f64> = (0..=500).map(|i| 1.0 - binary_entropy(i as f64 / 1000.0)).collect();
    assert!(caps.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(caps[500], 0.0);
}

#[test]
fn consecutive_outputs_are_independent() {
    let ch = Channel::bsc(0.3).unwrap();
    let trace = ch.transmit(&vec![0; 100_001], 17).unwrap();
    let mut joint = [[0f64; 2]; 2];
    for w in trace.outputs.windows(2) {
        joint[w[0]][w[1]] += 1.0;
    }
    let total: f64 = joint.iter().flatten().sum();
    let row: Vec<f64> = (0..2).map(|a| joint[a].iter().sum::<f64>()).collect();
    let col: Vec<f64> = (0..2).map(|b| joint[0][b] + joint[1][b]).collect();
    let chi2: f64 = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .map(|(a, b)| {
            let expected = row[a] * col[b] / total;
            (joint[a][b] - expected).powi(2) / expected
        })
        .sum();
    // one degree of freedom, 0.1% level
    assert!(chi2 < 10.83, "chi2 = {chi2}");
}

#[test]
fn transmit_is_pure_given_seed() {
    let ch = Channel::erasure(4, 0.4).unwrap();
    let inputs: Vec<usize> = (0..1000).map(|i| (i * 7) % 4).collect();
    assert_eq!(ch.transmit(&inputs, 3).unwrap(), ch.transmit(&inputs, 3).unwrap());
}
