//! Three-tier verification triage: tier assignment, per-tier metrics, the
//! verification/error cost model and cost-minimizing threshold search.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{
    CaseAggregate, CostParams, LabelUniverse, StandardizedCase, Tier, TierPlan, TierReport,
    TierTriple, TOLERANCE,
};
use crate::rng;
use crate::stats::{bootstrap_ci, percentile_sorted, Statistic, DEFAULT_RESAMPLES};

/// Tier of every case, keyed by case id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TierAssignment {
    tiers: BTreeMap<String, Tier>,
}

impl TierAssignment {
    pub fn get(&self, case_id: &str) -> Option<Tier> {
        self.tiers.get(case_id).copied()
    }

    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Tier)> {
        self.tiers.iter().map(|(k, &t)| (k.as_str(), t))
    }

    /// Case ids in one tier, sorted.
    pub fn members(&self, tier: Tier) -> Vec<&str> {
        self.iter().filter(|&(_, t)| t == tier).map(|(id, _)| id).collect()
    }

    pub fn counts(&self) -> TierTriple<usize> {
        let mut counts = TierTriple::default();
        for (_, t) in self.iter() {
            counts[t] += 1;
        }
        counts
    }
}

#[inline]
fn tier_of(q: f64, theta_high: f64, theta_low: f64) -> Tier {
    if q >= theta_high {
        Tier::High
    } else if q < theta_low {
        Tier::Low
    } else {
        Tier::Medium
    }
}

/// `Q >= theta_high` is high, `Q < theta_low` is low, everything else medium.
pub fn assign_tiers(
    scored: &[StandardizedCase],
    theta_high: f64,
    theta_low: f64,
) -> Result<TierAssignment> {
    if !(theta_low < theta_high) {
        return Err(Error::InvalidThresholds {
            low: theta_low,
            high: theta_high,
        });
    }
    let mut tiers = BTreeMap::new();
    for s in scored {
        if tiers
            .insert(s.case_id.clone(), tier_of(s.quality_score, theta_high, theta_low))
            .is_some()
        {
            return Err(Error::InvalidParameter(alloc::format!(
                "case `{}` scored twice",
                s.case_id
            )));
        }
    }
    Ok(TierAssignment { tiers })
}

/// Coverage and error rate from raw counts. Both the threshold search and the
/// reports go through here so their costs agree bit-for-bit.
fn tier_rates(n: usize, correct: usize, total: usize) -> (f64, Option<f64>, Option<f64>) {
    let coverage = n as f64 / total as f64;
    if n == 0 {
        return (coverage, None, None);
    }
    let accuracy = correct as f64 / n as f64;
    (coverage, Some(accuracy), Some(1.0 - accuracy))
}

/// Macro F1 of consensus vs true label over the full label universe; classes
/// with no support and no predictions contribute 0.
pub fn macro_f1(cases: &[&CaseAggregate], universe: &LabelUniverse) -> Result<f64> {
    let k = universe.k();
    let mut tp = alloc::vec![0usize; k];
    let mut fp = alloc::vec![0usize; k];
    let mut fn_ = alloc::vec![0usize; k];
    for case in cases {
        let truth = case.true_label.as_deref().ok_or_else(|| Error::MissingTruth {
            case_id: case.case_id.clone(),
        })?;
        let unknown = |l: &str| Error::UnknownLabel {
            label: l.to_string(),
        };
        let t = universe.position(truth).ok_or_else(|| unknown(truth))?;
        let p = universe
            .position(&case.consensus_label)
            .ok_or_else(|| unknown(&case.consensus_label))?;
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let sum: f64 = (0..k)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(sum / k as f64)
}

/// Per-tier n, coverage, accuracy, error rate, macro F1 and a bootstrap 95%
/// interval on accuracy. Empty tiers are reported with `None` metrics.
///
/// The interval for the tier at position `i` in high/medium/low order uses
/// seed `seed + i`.
pub fn tier_metrics(
    assignment: &TierAssignment,
    aggregates: &[CaseAggregate],
    universe: &LabelUniverse,
    seed: u64,
) -> Result<TierTriple<TierReport>> {
    let by_id: BTreeMap<&str, &CaseAggregate> =
        aggregates.iter().map(|a| (a.case_id.as_str(), a)).collect();
    let mut members: TierTriple<Vec<&CaseAggregate>> = TierTriple::default();
    for (id, tier) in assignment.iter() {
        let agg = by_id.get(id).ok_or_else(|| {
            Error::InvalidParameter(alloc::format!("assigned case `{id}` has no aggregate"))
        })?;
        members[tier].push(agg);
    }
    let total = assignment.len();
    if total == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }

    let mut out = Vec::with_capacity(3);
    for (idx, tier) in Tier::ALL.into_iter().enumerate() {
        let cases = &members[tier];
        let mut correct = 0;
        let mut flags = Vec::with_capacity(cases.len());
        for c in cases {
            let ok = c.correct.ok_or_else(|| Error::MissingTruth {
                case_id: c.case_id.clone(),
            })?;
            correct += usize::from(ok);
            flags.push((if ok { 1.0 } else { 0.0 }, 0.0));
        }
        let (coverage, accuracy, error_rate) = tier_rates(cases.len(), correct, total);
        let macro_f1 = if cases.is_empty() {
            None
        } else {
            Some(macro_f1(cases, universe)?)
        };
        let ci = match accuracy {
            Some(acc) if cases.len() >= 3 => {
                let b = bootstrap_ci(&flags, Statistic::Mean, DEFAULT_RESAMPLES, seed.wrapping_add(idx as u64))?;
                // the percentile interval can sit a rounding step off the mean
                Some((b.low.min(acc), b.high.max(acc)))
            }
            _ => None,
        };
        out.push(TierReport {
            tier,
            n: cases.len(),
            coverage,
            accuracy,
            error_rate,
            macro_f1,
            ci,
        });
    }
    let low = out.pop().expect("three tiers");
    let medium = out.pop().expect("three tiers");
    let high = out.pop().expect("three tiers");
    Ok(TierTriple { high, medium, low })
}

/// Verification cost, expected error cost and their sum, with per-tier terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// `C_t * V_t * U_c` per tier.
    pub verification_terms: TierTriple<f64>,
    /// `E_t * (1 - V_t) * R_t` per tier.
    pub error_terms: TierTriple<f64>,
    pub verification_cost: f64,
    pub error_cost: f64,
    pub total: f64,
}

fn cost_from_rates(
    coverage: &TierTriple<f64>,
    error_rate: &TierTriple<Option<f64>>,
    params: &CostParams,
) -> CostBreakdown {
    let v = params.verification_rate();
    let r = params.error_cost();
    let verification_terms = TierTriple::from_fn(|t| coverage[t] * v[t] * params.unit_cost());
    // an empty tier has no error rate and contributes no error cost
    let error_terms = TierTriple::from_fn(|t| error_rate[t].map_or(0.0, |e| e * (1.0 - v[t]) * r[t]));
    let verification_cost =
        verification_terms.high + verification_terms.medium + verification_terms.low;
    let error_cost = error_terms.high + error_terms.medium + error_terms.low;
    CostBreakdown {
        verification_terms,
        error_terms,
        verification_cost,
        error_cost,
        total: verification_cost + error_cost,
    }
}

/// Total cost = sum over tiers of `C_t V_t U_c` plus sum of `E_t (1 - V_t) R_t`.
pub fn expected_cost(
    reports: &TierTriple<TierReport>,
    params: &CostParams,
) -> Result<CostBreakdown> {
    let coverage = reports.map(|r| r.coverage);
    check_partition(&coverage)?;
    Ok(cost_from_rates(&coverage, &reports.map(|r| r.error_rate), params))
}

/// Cost from explicit coverages and error rates.
pub fn expected_cost_from(
    coverage: &TierTriple<f64>,
    error_rate: &TierTriple<f64>,
    params: &CostParams,
) -> Result<CostBreakdown> {
    check_partition(coverage)?;
    for (tier, &e) in error_rate.iter() {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::InvalidParameter(alloc::format!(
                "error rate for tier {tier} must lie in [0, 1], got {e}"
            )));
        }
    }
    Ok(cost_from_rates(coverage, &error_rate.map(|&e| Some(e)), params))
}

fn check_partition(coverage: &TierTriple<f64>) -> Result<()> {
    let sum = coverage.high + coverage.medium + coverage.low;
    if coverage.iter().any(|(_, &c)| !(0.0..=1.0).contains(&c)) || (sum - 1.0).abs() > TOLERANCE {
        return Err(Error::InvalidParameter(alloc::format!(
            "tier coverages must lie in [0, 1] and sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// `1 - sum C_t V_t`: the share of verification work saved against checking
/// every case.
///
/// Evaluated as `sum C_t (1 - V_t) / sum C_t`, which equals the above for
/// coverages summing to one and is exactly 0 (1) when every rate is 1 (0).
pub fn effort_reduction(coverage: &TierTriple<f64>, verification: &TierTriple<f64>) -> f64 {
    let covered: f64 = Tier::ALL.iter().map(|&t| coverage[t]).sum();
    if covered == 0.0 {
        return 0.0;
    }
    let skipped: f64 = Tier::ALL.iter().map(|&t| coverage[t] * (1.0 - verification[t])).sum();
    (skipped / covered).clamp(0.0, 1.0)
}

/// [`effort_reduction`] for a set of tier reports.
pub fn effort_reduction_for(reports: &TierTriple<TierReport>, params: &CostParams) -> f64 {
    effort_reduction(&reports.map(|r| r.coverage), &params.verification_rate())
}

/// Threshold search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSearch {
    /// Spacing of the quantile grid; `1 / grid_step` must be an integer.
    pub grid_step: f64,
    /// Every tier must hold at least this share of cases.
    pub min_tier_coverage: f64,
    /// Also consider the (1/3, 2/3) quantile split.
    pub include_terciles: bool,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            min_tier_coverage: 0.10,
            include_terciles: true,
        }
    }
}

impl ThresholdSearch {
    /// Candidate `(q_low, q_high)` pairs in visiting order.
    pub fn candidates(&self) -> Result<Vec<(f64, f64)>> {
        let inv = libm::round(1.0 / self.grid_step);
        if !(self.grid_step > 0.0 && self.grid_step < 1.0) || (inv * self.grid_step - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParameter(alloc::format!(
                "quantile grid step {} must divide 1",
                self.grid_step
            )));
        }
        if !(self.min_tier_coverage >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "minimum tier coverage {} must be >= 0",
                self.min_tier_coverage
            )));
        }
        // three tiers cannot each hold more than a third of the cases
        if self.min_tier_coverage > 1.0 / 3.0 {
            return Err(Error::Infeasible {
                min_coverage: self.min_tier_coverage,
            });
        }
        let steps = inv as usize;
        let mut out = Vec::new();
        for lo in 1..steps {
            for hi in lo + 1..steps {
                out.push((lo as f64 / inv, hi as f64 / inv));
            }
        }
        if self.include_terciles {
            out.push((1.0 / 3.0, 2.0 / 3.0));
        }
        Ok(out)
    }
}

/// Calibration data aligned with the scores: sorted quality scores with a
/// running count of correct cases.
struct Calibration {
    sorted_q: Vec<f64>,
    correct_prefix: Vec<usize>,
}

impl Calibration {
    fn new(scored: &[StandardizedCase], aggregates: &[CaseAggregate]) -> Result<Self> {
        check_aligned(scored, aggregates)?;
        let mut pairs = Vec::with_capacity(scored.len());
        for (s, a) in scored.iter().zip(aggregates) {
            let ok = a.correct.ok_or_else(|| Error::MissingTruth {
                case_id: a.case_id.clone(),
            })?;
            pairs.push((s.quality_score, ok));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut correct_prefix = Vec::with_capacity(pairs.len() + 1);
        correct_prefix.push(0);
        for &(_, ok) in &pairs {
            correct_prefix.push(correct_prefix.last().unwrap() + usize::from(ok));
        }
        Ok(Self {
            sorted_q: pairs.into_iter().map(|p| p.0).collect(),
            correct_prefix,
        })
    }

    fn theta(&self, q: f64) -> f64 {
        percentile_sorted(&self.sorted_q, q)
    }

    /// Tier counts and correct counts for a threshold pair.
    fn split(&self, theta_low: f64, theta_high: f64) -> (TierTriple<usize>, TierTriple<usize>) {
        let n = self.sorted_q.len();
        let low_end = self.sorted_q.partition_point(|&q| q < theta_low);
        let high_start = self.sorted_q.partition_point(|&q| q < theta_high);
        let c = &self.correct_prefix;
        let counts = TierTriple::new(n - high_start, high_start - low_end, low_end);
        let correct = TierTriple::new(c[n] - c[high_start], c[high_start] - c[low_end], c[low_end]);
        (counts, correct)
    }
}

fn check_aligned(scored: &[StandardizedCase], aggregates: &[CaseAggregate]) -> Result<()> {
    if scored.len() != aggregates.len() {
        return Err(Error::LengthMismatch {
            left: scored.len(),
            right: aggregates.len(),
        });
    }
    if let Some((s, a)) = scored.iter().zip(aggregates).find(|(s, a)| s.case_id != a.case_id) {
        return Err(Error::InvalidParameter(alloc::format!(
            "scores and aggregates are not aligned (`{}` vs `{}`)",
            s.case_id,
            a.case_id
        )));
    }
    if scored.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(())
}

/// Cost of the plan whose thresholds are the `q_low` and `q_high` quantiles of
/// the quality scores. `None` when the quantiles coincide.
pub fn cost_at_quantiles(
    scored: &[StandardizedCase],
    aggregates: &[CaseAggregate],
    params: &CostParams,
    q_low: f64,
    q_high: f64,
) -> Result<Option<CostBreakdown>> {
    let cal = Calibration::new(scored, aggregates)?;
    let (theta_low, theta_high) = (cal.theta(q_low), cal.theta(q_high));
    if !(theta_low < theta_high) {
        return Ok(None);
    }
    let (counts, correct) = cal.split(theta_low, theta_high);
    let n = cal.sorted_q.len();
    let rates = TierTriple::from_fn(|t| tier_rates(counts[t], correct[t], n));
    Ok(Some(cost_from_rates(
        &rates.map(|r| r.0),
        &rates.map(|r| r.2),
        params,
    )))
}

/// Full plan (assignment, reports with intervals, costs) at fixed quantiles.
#[allow(clippy::too_many_arguments)]
pub fn plan_at_quantiles(
    scored: &[StandardizedCase],
    aggregates: &[CaseAggregate],
    universe: &LabelUniverse,
    params: &CostParams,
    q_low: f64,
    q_high: f64,
    seed: u64,
) -> Result<TierPlan> {
    let cal = Calibration::new(scored, aggregates)?;
    let (theta_low, theta_high) = (cal.theta(q_low), cal.theta(q_high));
    let assignment = assign_tiers(scored, theta_high, theta_low)?;
    let tier_reports = tier_metrics(&assignment, aggregates, universe, seed)?;
    let cost = expected_cost(&tier_reports, params)?;
    let acc = tier_reports.map(|r| r.accuracy);
    let non_monotone_accuracy = match (acc.high, acc.medium, acc.low) {
        (Some(h), Some(m), Some(l)) => !(h >= m && m >= l),
        _ => false,
    };
    Ok(TierPlan {
        theta_high,
        theta_low,
        q_low,
        q_high,
        effort_reduction: effort_reduction_for(&tier_reports, params),
        tier_reports,
        params: *params,
        verification_cost: cost.verification_cost,
        error_cost: cost.error_cost,
        total_cost: cost.total,
        non_monotone_accuracy,
    })
}

/// Searches quantile pairs for the thresholds minimizing total cost while
/// every tier keeps at least the coverage floor. Ties go to the larger high
/// tier, then to the lower `q_low`.
pub fn optimize_thresholds(
    scored: &[StandardizedCase],
    aggregates: &[CaseAggregate],
    universe: &LabelUniverse,
    params: &CostParams,
    search: &ThresholdSearch,
    seed: u64,
) -> Result<TierPlan> {
    let candidates = search.candidates()?;
    let cal = Calibration::new(scored, aggregates)?;
    let n = cal.sorted_q.len();
    let floor = search.min_tier_coverage - 1e-12;

    // (total, high coverage, q_low, q_high)
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for (q_low, q_high) in candidates {
        let (theta_low, theta_high) = (cal.theta(q_low), cal.theta(q_high));
        if !(theta_low < theta_high) {
            continue;
        }
        let (counts, correct) = cal.split(theta_low, theta_high);
        let rates = TierTriple::from_fn(|t| tier_rates(counts[t], correct[t], n));
        let coverage = rates.map(|r| r.0);
        if coverage.iter().any(|(_, &c)| c < floor) {
            continue;
        }
        let total = cost_from_rates(&coverage, &rates.map(|r| r.2), params).total;
        let better = match best {
            None => true,
            Some((bt, bh, bl, _)) => {
                total < bt || (total == bt && (coverage.high > bh || (coverage.high == bh && q_low < bl)))
            }
        };
        if better {
            best = Some((total, coverage.high, q_low, q_high));
        }
    }
    let (_, _, q_low, q_high) = best.ok_or(Error::Infeasible {
        min_coverage: search.min_tier_coverage,
    })?;
    plan_at_quantiles(scored, aggregates, universe, params, q_low, q_high, seed)
}

/// Per tier, a uniform sample without replacement of `ceil(V_t * n_t)` case
/// ids, drawn from one seeded stream in high/medium/low order. Each sample is
/// returned sorted.
pub fn stratified_sample(
    assignment: &TierAssignment,
    params: &CostParams,
    seed: u64,
) -> TierTriple<Vec<String>> {
    let mut stream = rng::stream(seed);
    let rates = params.verification_rate();
    let mut draw = |tier: Tier| {
        let mut pool: Vec<&str> = assignment.members(tier);
        // guard against products like 0.15 * 100 landing a hair above 15
        let size = libm::ceil(rates[tier] * pool.len() as f64 - 1e-9).max(0.0) as usize;
        let size = size.min(pool.len());
        for i in 0..size {
            let j = i + rng::below(&mut stream, pool.len() - i);
            pool.swap(i, j);
        }
        let mut picked: Vec<String> = pool[..size].iter().map(|s| s.to_string()).collect();
        picked.sort();
        picked
    };
    let high = draw(Tier::High);
    let medium = draw(Tier::Medium);
    let low = draw(Tier::Low);
    TierTriple { high, medium, low }
}
