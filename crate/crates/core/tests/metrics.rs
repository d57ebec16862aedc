use proptest::prelude::*;
use rand::Rng;
use tbrisk::metrics::{auc_roc, av_recall, av_recall_10_40, recall_at_k, recall_curve};
use tbrisk::seed;

/// Scores on a coarse grid so ties are common, labels with at least one positive.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (1usize..=200).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(0i32..8).prop_map(|v| v as f64 / 8.0), -1.0f64..1.0], n),
            prop::collection::vec(prop::bool::weighted(0.3), n),
        )
            .prop_map(|(s, y)| {
                let mut y: Vec<u8> = y.into_iter().map(u8::from).collect();
                if !y.contains(&1) {
                    let last = y.len() - 1;
                    y[last] = 1;
                }
                (s, y)
            })
    })
}

/// Recall by counting, for each positive, how many rows outrank it.
fn brute_recall(scores: &[f64], labels: &[u8], k: u32) -> f64 {
    let n = scores.len();
    // ceil(k * n / 100) in integers.
    let take = (k as usize * n).div_ceil(100);
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let mut found = 0;
    for i in 0..n {
        if labels[i] != 1 {
            continue;
        }
        let ahead = (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count();
        if ahead < take {
            found += 1;
        }
    }
    found as f64 / positives as f64
}

fn brute_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y == 0).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut twice = 0u64;
    for p in &pos {
        for q in &neg {
            if p > q {
                twice += 2;
            } else if p == q {
                twice += 1;
            }
        }
    }
    Some((twice as f64 / 2.0) / (pos.len() as f64 * neg.len() as f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn recall_and_auc_match_enumeration((scores, labels) in instance()) {
        for k in [1u32, 5, 10, 13, 20, 33, 40, 50, 77, 100] {
            prop_assert_eq!(recall_at_k(&scores, &labels, k as f64).unwrap(), brute_recall(&scores, &labels, k));
        }
        let curve = recall_curve(&scores, &labels).unwrap();
        for k in 1..=100u32 {
            prop_assert_eq!(curve[k as usize - 1], brute_recall(&scores, &labels, k));
        }
        prop_assert_eq!(auc_roc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
    }

    #[test]
    fn av_recall_is_the_31_term_mean((scores, labels) in instance()) {
        let mean = (10..=40).map(|k| brute_recall(&scores, &labels, k)).sum::<f64>() / 31.0;
        let got = av_recall_10_40(&scores, &labels).unwrap();
        prop_assert!((got - mean).abs() <= 1e-12);
        let lo = recall_at_k(&scores, &labels, 10.0).unwrap();
        let hi = recall_at_k(&scores, &labels, 40.0).unwrap();
        // A mean of equal terms can land one ulp away from the term.
        prop_assert!(lo - 1e-12 <= got && got <= hi + 1e-12);
        prop_assert_eq!(av_recall(&scores, &labels, 20, 20).unwrap(), recall_at_k(&scores, &labels, 20.0).unwrap());
    }

    #[test]
    fn recall_is_monotone_in_k((scores, labels) in instance()) {
        let curve = recall_curve(&scores, &labels).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(curve[99], 1.0);
    }

    #[test]
    fn strictly_increasing_transforms_change_nothing((scores, labels) in instance()) {
        // Cubing plus a shift is strictly increasing and, on these inputs,
        // maps distinct values to distinct values.
        let moved: Vec<f64> = scores.iter().map(|s| s * s * s + 4.0 * s + 3.0).collect();
        for (i, j) in (0..scores.len()).flat_map(|i| (0..scores.len()).map(move |j| (i, j))) {
            prop_assume!((scores[i] < scores[j]) == (moved[i] < moved[j]));
            prop_assume!((scores[i] == scores[j]) == (moved[i] == moved[j]));
        }
        prop_assert_eq!(recall_curve(&moved, &labels).unwrap(), recall_curve(&scores, &labels).unwrap());
        prop_assert_eq!(auc_roc(&moved, &labels).unwrap(), auc_roc(&scores, &labels).unwrap());
        prop_assert_eq!(av_recall_10_40(&moved, &labels).unwrap(), av_recall_10_40(&scores, &labels).unwrap());
    }
}

#[test]
fn random_scores_average_a_quarter() {
    let n = 10_000;
    let mut total = 0.0;
    for trial in 0..200 {
        let mut rng = seed::rng(seed::derive(7, &format!("trial:{trial}")));
        let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let v = av_recall_10_40(&scores, &labels).unwrap();
        assert!((v - 0.25).abs() <= 0.03, "trial {trial}: {v}");
        total += v;
    }
    assert!((total / 200.0 - 0.25).abs() < 0.005);
}
