//! Correlation, significance, multiple-comparison correction and bootstrap
//! intervals.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::CorrelationResult;
use crate::rng;
use crate::special;

/// Resamples used when a caller does not choose.
pub const DEFAULT_RESAMPLES: usize = 1000;
/// Smallest resample count accepted by [`bootstrap_ci`].
pub const MIN_RESAMPLES: usize = 100;

/// Pearson product-moment correlation. Against a 0/1 column this is the
/// point-biserial correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: x.len(),
        });
    }
    pearson_unchecked(x, y).ok_or(Error::UndefinedCorrelation("constant column"))
}

/// `None` when either column is constant.
pub(crate) fn pearson_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 || is_constant(x) || is_constant(y) {
        return None;
    }
    Some((sxy / (libm::sqrt(sxx) * libm::sqrt(syy))).clamp(-1.0, 1.0))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Two-tailed p-value of a Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonTest {
    pub p: f64,
    /// |r| = 1; `p` is reported as 0.
    pub degenerate: bool,
}

/// Two-tailed significance of `r` over `n` pairs via
/// `t = r sqrt((n - 2) / (1 - r^2))` and the Student-t distribution with
/// `n - 2` degrees of freedom.
pub fn pearson_p(r: f64, n: usize) -> Result<PearsonTest> {
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(alloc::format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(PearsonTest {
            p: 0.0,
            degenerate: true,
        });
    }
    if r == 0.0 {
        return Ok(PearsonTest {
            p: 1.0,
            degenerate: false,
        });
    }
    // df / (df + t^2) simplifies to 1 - r^2
    let x = (1.0 - r) * (1.0 + r);
    let p = special::student_t_two_tailed_from_x(x, (n - 2) as f64);
    Ok(PearsonTest {
        p,
        degenerate: false,
    })
}

/// Statistic evaluated on each bootstrap resample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// Pearson correlation of the pair columns.
    Correlation,
    /// Mean of the first column.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    /// Resamples dropped because a column was constant.
    pub skipped: usize,
}

/// Percentile 95% bootstrap interval, resampling cases with replacement.
///
/// Resamples where the correlation is undefined are skipped and counted; more
/// than half skipped is an error.
pub fn bootstrap_ci(
    pairs: &[(f64, f64)],
    statistic: Statistic,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapInterval> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidParameter(alloc::format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    let mut stream = rng::stream(seed);
    let mut xs = alloc::vec![0.0; n];
    let mut ys = alloc::vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    let mut skipped = 0;
    for _ in 0..resamples {
        for i in 0..n {
            let (x, y) = pairs[rng::below(&mut stream, n)];
            xs[i] = x;
            ys[i] = y;
        }
        let value = match statistic {
            Statistic::Mean if is_constant(&xs) => Some(xs[0]),
            Statistic::Mean => Some(xs.iter().sum::<f64>() / n as f64),
            Statistic::Correlation => pearson_unchecked(&xs, &ys),
        };
        match value {
            Some(v) => stats.push(v),
            None => skipped += 1,
        }
    }
    if 2 * skipped > resamples {
        return Err(Error::DegenerateBootstrap { skipped, resamples });
    }
    stats.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        low: percentile_sorted(&stats, 0.025),
        high: percentile_sorted(&stats, 0.975),
        skipped,
    })
}

/// Linearly interpolated quantile of sorted data (`q` in [0, 1]).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = libm::ceil(rank) as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Bonferroni-corrected significance level `alpha / m`.
pub fn bonferroni_alpha(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("alpha {alpha} outside (0, 1)")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("number of tests must be >= 1".into()));
    }
    Ok(alpha / m as f64)
}

/// Family-wise significance level the report rows are judged against.
pub const ALPHA: f64 = 0.05;

/// Correlates a score with binary correctness and fills a full report row.
pub fn correlate_with_accuracy(
    scores: &[f64],
    correct: &[bool],
    m_tests: usize,
    seed: u64,
) -> Result<CorrelationResult> {
    let outcome: Vec<f64> = correct.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    correlate_with_outcome(scores, &outcome, m_tests, seed)
}

/// As [`correlate_with_accuracy`] for a real-valued accuracy column.
pub fn correlate_with_outcome(
    scores: &[f64],
    outcome: &[f64],
    m_tests: usize,
    seed: u64,
) -> Result<CorrelationResult> {
    if scores.len() != outcome.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: outcome.len(),
        });
    }
    if outcome.len() >= 3 && is_constant(outcome) {
        return Err(Error::UndefinedCorrelation(
            "accuracy is constant (all correct or all incorrect)",
        ));
    }
    let r = pearson(scores, outcome)?;
    let test = pearson_p(r, scores.len())?;
    let pairs: Vec<(f64, f64)> = scores.iter().copied().zip(outcome.iter().copied()).collect();
    let ci = bootstrap_ci(&pairs, Statistic::Correlation, DEFAULT_RESAMPLES, seed)?;
    let alpha = bonferroni_alpha(ALPHA, m_tests)?;
    Ok(CorrelationResult {
        r,
        p_value: test.p,
        n: scores.len(),
        ci_low: ci.low,
        ci_high: ci.high,
        significant_bonferroni: test.p < alpha,
        degenerate: test.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        // cov = 4/4 ... brute force: sum dx*dy = 4, sxx = syy = 5
        assert!((pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn pearson_p_examples() {
        assert_eq!(pearson_p(0.0, 10).unwrap().p, 1.0);
        assert_eq!(pearson_p(0.0, 1000).unwrap().p, 1.0);
        assert!(pearson_p(0.429, 645).unwrap().p < 0.001);
        let one = pearson_p(1.0, 10).unwrap();
        assert_eq!(one.p, 0.0);
        assert!(one.degenerate);
        assert!(pearson_p(0.5, 2).is_err());
    }

    #[test]
    fn pearson_p_monotone() {
        let mut last = 1.0;
        for i in 1..20 {
            let p = pearson_p(i as f64 * 0.05, 40).unwrap().p;
            assert!(p < last);
            last = p;
        }
        let mut last = 1.0;
        for n in [5, 10, 20, 50, 100, 500] {
            let p = pearson_p(0.2, n).unwrap().p;
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn bonferroni_examples() {
        assert!((bonferroni_alpha(0.05, 6).unwrap() - 0.008_333_333).abs() < 1e-9);
        assert_eq!(bonferroni_alpha(0.05, 1).unwrap(), 0.05);
        assert!((bonferroni_alpha(0.01, 4).unwrap() - 0.0025).abs() < 1e-15);
        assert!(bonferroni_alpha(0.05, 0).is_err());
        assert!(bonferroni_alpha(1.0, 2).is_err());
    }

    #[test]
    fn bootstrap_degenerate_mean() {
        let pairs = vec![(0.7, 0.0); 20];
        let ci = bootstrap_ci(&pairs, Statistic::Mean, 500, 1).unwrap();
        assert_eq!((ci.low, ci.high), (0.7, 0.7));
    }

    #[test]
    fn bootstrap_is_reproducible_and_validates() {
        let pairs: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, ((i * 7) % 11) as f64)).collect();
        let a = bootstrap_ci(&pairs, Statistic::Correlation, 1000, 99).unwrap();
        let b = bootstrap_ci(&pairs, Statistic::Correlation, 1000, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.low <= a.high);
        assert!(bootstrap_ci(&pairs[..2], Statistic::Mean, 1000, 1).is_err());
        assert!(bootstrap_ci(&pairs, Statistic::Mean, 50, 1).is_err());
    }

    #[test]
    fn bootstrap_too_many_constant_resamples() {
        // constant x column: every resample is undefined
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (1.0, i as f64)).collect();
        assert!(matches!(
            bootstrap_ci(&pairs, Statistic::Correlation, 200, 3),
            Err(Error::DegenerateBootstrap { .. })
        ));
    }

    #[test]
    fn correlate_identity_and_degenerate() {
        let correct = [true, false, true, true, false, false, true, false];
        let scores: Vec<f64> = correct.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        let res = correlate_with_accuracy(&scores, &correct, 6, 5).unwrap();
        assert!((res.r - 1.0).abs() < 1e-12);
        assert!(res.significant_bonferroni);
        assert!(matches!(
            correlate_with_accuracy(&scores, &[true; 8], 1, 5),
            Err(Error::UndefinedCorrelation(_))
        ));
    }
}
