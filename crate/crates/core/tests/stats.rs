mod common;

use dualsig_core::stats::{bootstrap_ci, correlate_with_accuracy, pearson, pearson_p, Statistic};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two-sided permutation p-value for the correlation of `x` and `y`.
fn permutation_p(x: &[f64], y: &[f64], shuffles: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    let observed = pearson(x, y).unwrap().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = y.to_vec();
    let mut hits = 0;
    for _ in 0..shuffles {
        y.shuffle(&mut rng);
        if pearson(x, &y).unwrap().abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / shuffles as f64
}

/// `n` pairs whose sample correlation is exactly `r`.
fn pairs_with_r(n: usize, r: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let e: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let z = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n as f64;
        let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        v.iter().map(|a| (a - m) / sd).collect::<Vec<_>>()
    };
    let zx = z(&x);
    let ze = z(&e);
    // remove the component of e along x, then restandardize
    let proj = zx.iter().zip(&ze).map(|(a, b)| a * b).sum::<f64>() / (n as f64 - 1.0);
    let resid: Vec<f64> = zx.iter().zip(&ze).map(|(a, b)| b - proj * a).collect();
    let zr = z(&resid);
    let y = zx.iter().zip(&zr).map(|(a, b)| r * a + (1.0 - r * r).sqrt() * b).collect();
    (zx, y)
}

#[test]
fn p_value_agrees_with_statrs_student_t() {
    for &n in &[3usize, 5, 10, 30, 100, 645, 2000] {
        let df = (n - 2) as f64;
        let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for &r in &[-0.95, -0.5, -0.1, 0.01, 0.114, 0.3, 0.429, 0.8, 0.99] {
            let t = r * (df / (1.0 - r * r)).sqrt();
            let expected = 2.0 * t_dist.sf(t.abs());
            let got = pearson_p(r, n).unwrap().p;
            let tol = 1e-10 * expected.max(1e-300) + 1e-14;
            assert!((got - expected).abs() <= tol.max(1e-12), "n={n} r={r}: {got} vs {expected}");
        }
    }
}

#[test]
fn p_value_matches_permutation_oracle_at_r_0_3() {
    let (x, y) = pairs_with_r(30, 0.3, 11);
    assert!((pearson(&x, &y).unwrap() - 0.3).abs() < 1e-12);
    let parametric = pearson_p(0.3, 30).unwrap().p;
    let perm = permutation_p(&x, &y, 10_000, 12);
    assert!((parametric - perm).abs() < 0.01, "{parametric} vs {perm}");
}

#[test]
fn bootstrap_contains_point_estimate_and_narrows_with_n() {
    let width = |n: usize| {
        let aggs = common::aggregates(&common::calibrated(n, 3));
        let pairs: Vec<(f64, f64)> = aggs
            .iter()
            .map(|a| (a.external_entropy, f64::from(u8::from(a.correct.unwrap()))))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let r = pearson(&x, &y).unwrap();
        let ci = bootstrap_ci(&pairs, Statistic::Correlation, 1000, 8).unwrap();
        assert!(ci.low <= r && r <= ci.high, "{r} not in {ci:?}");
        ci.high - ci.low
    };
    assert!(width(2000) < width(200));
}

#[test]
fn shuffled_scores_are_not_significant() {
    use rand::seq::SliceRandom;
    let aggs = common::aggregates(&common::calibrated(2000, 21));
    let correct: Vec<bool> = aggs.iter().map(|a| a.correct.unwrap()).collect();
    let mut scores: Vec<f64> = aggs.iter().map(|a| a.external_entropy).collect();
    scores.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let res = correlate_with_accuracy(&scores, &correct, 6, 1).unwrap();
    assert!(res.r.abs() < 0.07);
    assert!(!res.significant_bonferroni);
}

#[test]
fn entropy_predicts_errors_on_simulated_data() {
    let aggs = common::aggregates(&common::calibrated(2000, 4));
    let correct: Vec<bool> = aggs.iter().map(|a| a.correct.unwrap()).collect();
    let entropy: Vec<f64> = aggs.iter().map(|a| a.external_entropy).collect();
    let res = correlate_with_accuracy(&entropy, &correct, 6, 1).unwrap();
    assert!(res.r < 0.0);
    assert!(res.p_value < 0.001);
    assert!(res.ci_low <= res.r && res.r <= res.ci_high);
}

proptest! {
    #[test]
    fn pearson_symmetric_and_affine_invariant(
        xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(r) = pearson(&x, &y) else { return Ok(()); };
        prop_assert!(r.abs() <= 1.0);
        prop_assert!((pearson(&y, &x).unwrap() - r).abs() < 1e-12);
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        if let Ok(rs) = pearson(&xs, &y) {
            prop_assert!((rs - r).abs() < 1e-9);
        }
    }

    #[test]
    fn bootstrap_reproducible(seed in any::<u64>()) {
        let pairs: Vec<(f64, f64)> = (0..25).map(|i| (i as f64, ((i * 13) % 7) as f64)).collect();
        let a = bootstrap_ci(&pairs, Statistic::Correlation, 200, seed).unwrap();
        let b = bootstrap_ci(&pairs, Statistic::Correlation, 200, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn p_value_in_unit_interval(r in -0.999f64..0.999, n in 3usize..5000) {
        let p = pearson_p(r, n).unwrap().p;
        prop_assert!((0.0..=1.0).contains(&p));
    }
}
