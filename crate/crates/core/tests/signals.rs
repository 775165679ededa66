mod common;

use dualsig_core::signal::{external_entropy, mean_confidence, quality_scores, risk_to_confidence, standardize};
use dualsig_core::WeightConfig;
use proptest::prelude::*;

/// Entropy through natural logs with Neumaier-compensated summation.
fn entropy_oracle(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / total as f64;
        let term = p * (1.0 / p).ln() / std::f64::consts::LN_2;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

proptest! {
    #[test]
    fn entropy_matches_oracle(k in 1usize..=6, counts in prop::collection::vec(0usize..=10, 1..=6)) {
        let counts: Vec<usize> = counts.into_iter().take(k).collect();
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let h = external_entropy(&counts, k).unwrap();
        prop_assert!((h - entropy_oracle(&counts)).abs() < 1e-12);
        prop_assert!(h >= 0.0 && h <= (k as f64).log2());
    }

    #[test]
    fn entropy_is_permutation_invariant(mut counts in prop::collection::vec(0usize..=10, 2..=6), seed in any::<u64>()) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let k = counts.len();
        let h = external_entropy(&counts, k).unwrap();
        let n = counts.len();
        counts.rotate_left((seed as usize) % n);
        counts.reverse();
        prop_assert!((external_entropy(&counts, k).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounds_attained(k in 1usize..=6, m in 1usize..=10) {
        prop_assert_eq!(external_entropy(&[m], k).unwrap(), 0.0);
        let uniform = vec![m; k];
        prop_assert_eq!(external_entropy(&uniform, k).unwrap(), (k as f64).log2());
    }

    #[test]
    fn confidence_is_affine_and_decreasing(a in 0.50f64..=0.99, b in 0.50f64..=0.99) {
        let (ca, cb) = (risk_to_confidence(a).unwrap(), risk_to_confidence(b).unwrap());
        prop_assert!((ca - (1.5 - a)).abs() < 1e-15);
        if a < b {
            prop_assert!(ca > cb);
        }
        prop_assert!((mean_confidence(&[a, a, a]).unwrap() - (1.5 - a)).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent(values in prop::collection::vec(-1e3f64..1e3, 2..50)) {
        let z = standardize(&values).unwrap();
        let zz = standardize(&z).unwrap();
        for (a, b) in z.iter().zip(&zz) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let first = values[0];
        if values.iter().any(|&v| v != first) {
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_weight_scaling_keeps_ranking(w1 in 0.0f64..2.0, w2 in 0.01f64..2.0, lambda in 0.1f64..10.0, seed in 0u64..50) {
        let aggs = common::aggregates(&common::calibrated(60, seed));
        let base = quality_scores(&aggs, &WeightConfig::new(w1, w2, "d").unwrap()).unwrap();
        let scaled = quality_scores(&aggs, &WeightConfig::new(lambda * w1, lambda * w2, "d").unwrap()).unwrap();
        for i in 0..base.len() {
            for j in 0..base.len() {
                let (a, b) = (base[i].quality_score, base[j].quality_score);
                // only compare pairs separated by more than rounding noise
                if a - b > 1e-9 {
                    prop_assert!(scaled[i].quality_score > scaled[j].quality_score);
                }
            }
        }
    }
}

#[test]
fn thousand_random_count_vectors() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let k = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=10);
        let mut counts = vec![0usize; k];
        for _ in 0..m {
            counts[rng.gen_range(0..k)] += 1;
        }
        let h = external_entropy(&counts, k).unwrap();
        assert!((h - entropy_oracle(&counts)).abs() < 1e-12, "{counts:?}");
    }
}

#[test]
fn global_weights_track_correctness_on_simulated_data() {
    let aggs = common::aggregates(&common::calibrated(2000, 17));
    let w = WeightConfig::new(1.74, 0.10, WeightConfig::GLOBAL).unwrap();
    let q: Vec<f64> = quality_scores(&aggs, &w).unwrap().iter().map(|s| s.quality_score).collect();
    let y: Vec<f64> = aggs.iter().map(|a| f64::from(u8::from(a.correct.unwrap()))).collect();
    assert!(dualsig_core::stats::pearson(&q, &y).unwrap() > 0.0);
}
