//! The two uncertainty signals and their fusion into a quality score.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{
    outcomes, AccuracyMode, CaseAggregate, CorrelationResult, LabelUniverse, PredictionRecord,
    StandardizedCase, WeightConfig, RISK_MAX, RISK_MIN,
};
use crate::stats::correlate_with_outcome;

/// Shannon entropy (bits) of the label distribution given by `counts`.
///
/// Zero counts contribute nothing. A distribution concentrated on one label
/// returns exactly 0 and a uniform distribution over all `k` classes returns
/// exactly `log2 k`.
pub fn external_entropy(counts: &[usize], k: usize) -> Result<f64> {
    if counts.len() > k {
        return Err(Error::SchemaViolation {
            distinct: counts.len(),
            k,
        });
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let nonzero: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if nonzero.len() == 1 {
        return Ok(0.0);
    }
    let max_bits = libm::log2(k as f64);
    if nonzero.len() == k && nonzero.iter().all(|&c| c == nonzero[0]) {
        return Ok(max_bits);
    }
    let total = total as f64;
    let h = -nonzero
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * libm::log2(p)
        })
        .sum::<f64>();
    // rounding can push the sum a few ulps past either bound
    Ok(h.clamp(0.0, max_bits))
}

/// `1.5 - risk`, for risk on the 0.50..=0.99 scale.
pub fn risk_to_confidence(risk: f64) -> Result<f64> {
    if !(RISK_MIN..=RISK_MAX).contains(&risk) {
        return Err(Error::RiskOutOfRange {
            case_id: String::new(),
            model_id: String::new(),
            risk,
        });
    }
    Ok(1.5 - risk)
}

pub fn mean_confidence(risks: &[f64]) -> Result<f64> {
    if risks.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut sum = 0.0;
    for &r in risks {
        sum += risk_to_confidence(r)?;
    }
    Ok(sum / risks.len() as f64)
}

/// Groups records by case and computes both signals plus the consensus label.
///
/// Output is sorted by `case_id`. The consensus is the plurality label; ties go
/// to the label with the highest summed confidence, then to the
/// lexicographically smallest label.
pub fn aggregate_cases(
    records: &[PredictionRecord],
    universe: &LabelUniverse,
) -> Result<Vec<CaseAggregate>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let domain = first.domain_id();

    let mut by_case: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for rec in records {
        if rec.domain_id() != domain {
            return Err(Error::MixedDomains {
                first: domain.to_string(),
                second: rec.domain_id().to_string(),
            });
        }
        for label in core::iter::once(rec.predicted_label()).chain(rec.true_label()) {
            if !universe.contains(label) {
                return Err(Error::UnknownLabel {
                    label: label.to_string(),
                });
            }
        }
        by_case.entry(rec.case_id()).or_default().push(rec);
    }

    by_case
        .into_iter()
        .map(|(case_id, recs)| aggregate_one(case_id, domain, &recs, universe.k()))
        .collect()
}

fn aggregate_one(
    case_id: &str,
    domain: &str,
    recs: &[&PredictionRecord],
    k: usize,
) -> Result<CaseAggregate> {
    if recs.len() < 2 {
        return Err(Error::DegenerateEnsemble {
            case_id: case_id.to_string(),
        });
    }

    let mut models: Vec<&str> = recs.iter().map(|r| r.model_id()).collect();
    models.sort_unstable();
    if let Some(w) = models.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateRecord {
            case_id: case_id.to_string(),
            model_id: w[0].to_string(),
        });
    }

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut conf_by_label: BTreeMap<&str, f64> = BTreeMap::new();
    let mut risks = Vec::with_capacity(recs.len());
    for rec in recs {
        let conf = risk_to_confidence(rec.risk()).map_err(|_| Error::RiskOutOfRange {
            case_id: case_id.to_string(),
            model_id: rec.model_id().to_string(),
            risk: rec.risk(),
        })?;
        *counts.entry(rec.predicted_label().to_string()).or_default() += 1;
        *conf_by_label.entry(rec.predicted_label()).or_default() += conf;
        risks.push(rec.risk());
    }

    let count_vec: Vec<usize> = counts.values().copied().collect();
    let external_entropy = external_entropy(&count_vec, k)?;
    let mean_confidence = mean_confidence(&risks)?;

    let max_count = counts.values().copied().max().unwrap_or(0);
    let tied: Vec<&str> = counts
        .iter()
        .filter(|(_, &c)| c == max_count)
        .map(|(l, _)| l.as_str())
        .collect();
    let tie_flag = tied.len() > 1;
    // `tied` is in lexicographic order, so keeping the first strict maximum
    // leaves residual ties on the smallest label
    let mut consensus = tied[0];
    for &label in &tied[1..] {
        if conf_by_label[label] > conf_by_label[consensus] {
            consensus = label;
        }
    }

    let true_label = recs[0].true_label().map(str::to_string);
    if let Some(rec) = recs.iter().find(|r| r.true_label() != true_label.as_deref()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "case `{case_id}` has conflicting true labels (model `{}`)",
            rec.model_id()
        )));
    }
    let correct = true_label.as_deref().map(|t| t == consensus);
    let model_accuracy = true_label.as_deref().map(|t| {
        recs.iter().filter(|r| r.predicted_label() == t).count() as f64 / recs.len() as f64
    });

    Ok(CaseAggregate {
        case_id: case_id.to_string(),
        domain_id: domain.to_string(),
        num_models: recs.len(),
        num_classes: k,
        external_entropy,
        mean_confidence,
        consensus_label: consensus.to_string(),
        tie_flag,
        true_label,
        correct,
        model_accuracy,
        label_counts: counts,
    })
}

/// Z-scores with the sample (n - 1) standard deviation. A constant column maps
/// to all zeros.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(alloc::vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = libm::sqrt(var);
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Quality score per case: `w1 * (-entropy_std) + w2 * confidence_std`, with
/// standardization over exactly the supplied cases.
pub fn quality_scores(
    aggregates: &[CaseAggregate],
    weights: &WeightConfig,
) -> Result<Vec<StandardizedCase>> {
    let entropy: Vec<f64> = aggregates.iter().map(|a| a.external_entropy).collect();
    let confidence: Vec<f64> = aggregates.iter().map(|a| a.mean_confidence).collect();
    let entropy_std = standardize(&entropy)?;
    let confidence_std = standardize(&confidence)?;
    Ok(aggregates
        .iter()
        .zip(entropy_std)
        .zip(confidence_std)
        .map(|((agg, h), c)| StandardizedCase {
            case_id: agg.case_id.clone(),
            entropy_std: h,
            confidence_std: c,
            quality_score: fuse(weights.w1(), weights.w2(), h, c),
        })
        .collect())
}

/// Correlation of each raw signal with accuracy for one case set.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEffectiveness {
    pub domain: String,
    pub n: usize,
    /// Mean of the accuracy column.
    pub accuracy: f64,
    pub confidence: CorrelationResult,
    pub entropy: CorrelationResult,
}

/// Correlates mean confidence and external entropy with accuracy. `m_tests`
/// sets the Bonferroni family size (two signals per domain).
pub fn signal_effectiveness(
    domain: &str,
    aggregates: &[CaseAggregate],
    mode: AccuracyMode,
    m_tests: usize,
    seed: u64,
) -> Result<SignalEffectiveness> {
    let outcome = outcomes(aggregates, mode)?;
    let confidence: Vec<f64> = aggregates.iter().map(|a| a.mean_confidence).collect();
    let entropy: Vec<f64> = aggregates.iter().map(|a| a.external_entropy).collect();
    Ok(SignalEffectiveness {
        domain: domain.to_string(),
        n: aggregates.len(),
        accuracy: outcome.iter().sum::<f64>() / outcome.len().max(1) as f64,
        confidence: correlate_with_outcome(&confidence, &outcome, m_tests, seed)?,
        entropy: correlate_with_outcome(&entropy, &outcome, m_tests, seed)?,
    })
}

#[inline]
pub(crate) fn fuse(w1: f64, w2: f64, entropy_std: f64, confidence_std: f64) -> f64 {
    w1 * -entropy_std + w2 * confidence_std
}
