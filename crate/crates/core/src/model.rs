//! Domain types shared across the pipeline.
//!
//! Input types ([`PredictionRecord`], [`LabelUniverse`], [`WeightConfig`],
//! [`CostParams`]) validate at construction and expose read-only accessors.
//! Result types are plain data produced by the library.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Lowest admissible self-reported risk.
pub const RISK_MIN: f64 = 0.50;
/// Highest admissible self-reported risk.
pub const RISK_MAX: f64 = 0.99;
/// Absolute tolerance used when checking invariants on reals.
pub const TOLERANCE: f64 = 1e-9;

/// The declared set of classes for a dataset. `k` is its size, whether or not
/// every class is ever predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelUniverse {
    labels: Vec<String>,
}

impl LabelUniverse {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        let before = labels.len();
        labels.dedup();
        if labels.len() != before {
            return Err(Error::InvalidParameter("label universe contains duplicates".into()));
        }
        if labels.is_empty() || labels.iter().any(|l| l.is_empty()) {
            return Err(Error::InvalidParameter(
                "label universe must hold at least one non-empty label".into(),
            ));
        }
        Ok(Self { labels })
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    /// Labels in sorted order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

/// One model's prediction for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    case_id: String,
    model_id: String,
    domain_id: String,
    predicted_label: String,
    risk: f64,
    true_label: Option<String>,
}

impl PredictionRecord {
    pub fn new(
        case_id: impl Into<String>,
        model_id: impl Into<String>,
        domain_id: impl Into<String>,
        predicted_label: impl Into<String>,
        risk: f64,
        true_label: Option<String>,
    ) -> Result<Self> {
        let record = Self {
            case_id: case_id.into(),
            model_id: model_id.into(),
            domain_id: domain_id.into(),
            predicted_label: predicted_label.into(),
            risk,
            true_label,
        };
        if !(RISK_MIN..=RISK_MAX).contains(&risk) {
            return Err(Error::RiskOutOfRange {
                case_id: record.case_id,
                model_id: record.model_id,
                risk,
            });
        }
        Ok(record)
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn predicted_label(&self) -> &str {
        &self.predicted_label
    }

    pub fn risk(&self) -> f64 {
        self.risk
    }

    pub fn true_label(&self) -> Option<&str> {
        self.true_label.as_deref()
    }

    /// Same record with a different ground truth.
    pub fn with_true_label(mut self, true_label: Option<String>) -> Self {
        self.true_label = true_label;
        self
    }
}

/// Per-case fusion of every model's prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseAggregate {
    pub case_id: String,
    pub domain_id: String,
    pub label_counts: BTreeMap<String, usize>,
    /// M, the number of models that predicted this case.
    pub num_models: usize,
    /// k, from the declared label universe.
    pub num_classes: usize,
    /// Shannon entropy of the label distribution, in bits.
    pub external_entropy: f64,
    pub mean_confidence: f64,
    pub consensus_label: String,
    /// More than one label shared the maximal count.
    pub tie_flag: bool,
    pub true_label: Option<String>,
    /// Consensus label equals the true label.
    pub correct: Option<bool>,
    /// Fraction of individual models whose label equals the true label.
    pub model_accuracy: Option<f64>,
}

/// Which per-case accuracy the correlations are computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccuracyMode {
    /// 1 when the consensus label is correct, else 0.
    #[default]
    Consensus,
    /// Mean per-model correctness.
    ModelMean,
}

impl AccuracyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AccuracyMode::Consensus => "consensus",
            AccuracyMode::ModelMean => "model_mean",
        }
    }
}

impl core::str::FromStr for AccuracyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consensus" => Ok(AccuracyMode::Consensus),
            "model_mean" => Ok(AccuracyMode::ModelMean),
            other => Err(Error::InvalidParameter(alloc::format!("unknown accuracy mode `{other}`"))),
        }
    }
}

impl CaseAggregate {
    /// Accuracy target for this case under `mode`.
    pub fn outcome(&self, mode: AccuracyMode) -> Result<f64> {
        let missing = || Error::MissingTruth {
            case_id: self.case_id.clone(),
        };
        match mode {
            AccuracyMode::Consensus => self
                .correct
                .map(|c| if c { 1.0 } else { 0.0 })
                .ok_or_else(missing),
            AccuracyMode::ModelMean => self.model_accuracy.ok_or_else(missing),
        }
    }
}

/// Outcomes for a case set, in order.
pub fn outcomes(aggregates: &[CaseAggregate], mode: AccuracyMode) -> Result<Vec<f64>> {
    aggregates.iter().map(|a| a.outcome(mode)).collect()
}

/// Standardized signals and the fused quality score for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedCase {
    pub case_id: String,
    pub entropy_std: f64,
    pub confidence_std: f64,
    pub quality_score: f64,
}

/// Signal weights: `w1` multiplies negated standardized entropy, `w2`
/// standardized confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig {
    w1: f64,
    w2: f64,
    source_domain: String,
    objective_r: Option<f64>,
}

impl WeightConfig {
    pub const GLOBAL: &'static str = "global";

    pub fn new(w1: f64, w2: f64, source_domain: impl Into<String>) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(w1) || !ok(w2) || (w1 == 0.0 && w2 == 0.0) {
            return Err(Error::InvalidWeights { w1, w2 });
        }
        Ok(Self {
            w1,
            w2,
            source_domain: source_domain.into(),
            objective_r: None,
        })
    }

    pub fn with_objective(mut self, r: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(alloc::format!(
                "objective r {r} outside [-1, 1]"
            )));
        }
        self.objective_r = Some(r);
        Ok(self)
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    pub fn source_domain(&self) -> &str {
        &self.source_domain
    }

    pub fn objective_r(&self) -> Option<f64> {
        self.objective_r
    }
}

/// Triage tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    High,
    Medium,
    Low,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::High, Tier::Medium, Tier::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::High => "high",
            Tier::Medium => "medium",
            Tier::Low => "low",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Tier::High),
            "medium" => Ok(Tier::Medium),
            "low" => Ok(Tier::Low),
            other => Err(Error::InvalidParameter(alloc::format!("unknown tier `{other}`"))),
        }
    }
}

/// One value per tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TierTriple<T> {
    pub high: T,
    pub medium: T,
    pub low: T,
}

impl<T> TierTriple<T> {
    pub const fn new(high: T, medium: T, low: T) -> Self {
        Self { high, medium, low }
    }

    pub fn from_fn(mut f: impl FnMut(Tier) -> T) -> Self {
        Self {
            high: f(Tier::High),
            medium: f(Tier::Medium),
            low: f(Tier::Low),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> TierTriple<U> {
        TierTriple {
            high: f(&self.high),
            medium: f(&self.medium),
            low: f(&self.low),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Tier, &T)> {
        [
            (Tier::High, &self.high),
            (Tier::Medium, &self.medium),
            (Tier::Low, &self.low),
        ]
        .into_iter()
    }
}

impl<T> Index<Tier> for TierTriple<T> {
    type Output = T;

    fn index(&self, tier: Tier) -> &T {
        match tier {
            Tier::High => &self.high,
            Tier::Medium => &self.medium,
            Tier::Low => &self.low,
        }
    }
}

impl<T> IndexMut<Tier> for TierTriple<T> {
    fn index_mut(&mut self, tier: Tier) -> &mut T {
        match tier {
            Tier::High => &mut self.high,
            Tier::Medium => &mut self.medium,
            Tier::Low => &mut self.low,
        }
    }
}

/// Cost model inputs: unit verification cost, per-tier error cost and
/// per-tier verification rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    unit_cost: f64,
    error_cost: TierTriple<f64>,
    verification_rate: TierTriple<f64>,
}

impl CostParams {
    pub const DEFAULT_VERIFICATION: TierTriple<f64> = TierTriple::new(0.15, 0.60, 0.95);
    pub const DEFAULT_ERROR_COST: TierTriple<f64> = TierTriple::new(2.0, 3.0, 5.0);
    pub const DEFAULT_UNIT_COST: f64 = 1.0;

    pub fn new(
        unit_cost: f64,
        error_cost: TierTriple<f64>,
        verification_rate: TierTriple<f64>,
    ) -> Result<Self> {
        if !(unit_cost.is_finite() && unit_cost > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "unit verification cost must be > 0, got {unit_cost}"
            )));
        }
        for (tier, &r) in error_cost.iter() {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "error cost for tier {tier} must be > 0, got {r}"
                )));
            }
        }
        for (tier, &v) in verification_rate.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "verification rate for tier {tier} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self {
            unit_cost,
            error_cost,
            verification_rate,
        })
    }

    pub fn unit_cost(&self) -> f64 {
        self.unit_cost
    }

    pub fn error_cost(&self) -> TierTriple<f64> {
        self.error_cost
    }

    pub fn verification_rate(&self) -> TierTriple<f64> {
        self.verification_rate
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            unit_cost: Self::DEFAULT_UNIT_COST,
            error_cost: Self::DEFAULT_ERROR_COST,
            verification_rate: Self::DEFAULT_VERIFICATION,
        }
    }
}

/// Per-tier triage metrics. Metrics are `None` for an empty tier.
#[derive(Debug, Clone, PartialEq)]
pub struct TierReport {
    pub tier: Tier,
    pub n: usize,
    pub coverage: f64,
    pub accuracy: Option<f64>,
    pub error_rate: Option<f64>,
    pub macro_f1: Option<f64>,
    /// Percentile bootstrap 95% interval on accuracy; `None` below three cases.
    pub ci: Option<(f64, f64)>,
}

impl TierReport {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// A complete triage plan.
#[derive(Debug, Clone, PartialEq)]
pub struct TierPlan {
    pub theta_high: f64,
    pub theta_low: f64,
    /// Quantile levels the thresholds were read from.
    pub q_low: f64,
    pub q_high: f64,
    pub tier_reports: TierTriple<TierReport>,
    pub params: CostParams,
    pub verification_cost: f64,
    pub error_cost: f64,
    pub total_cost: f64,
    pub effort_reduction: f64,
    /// Tier accuracy fails to decrease from high to medium to low.
    pub non_monotone_accuracy: bool,
}

/// Correlation of a score with accuracy, with inference.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant_bonferroni: bool,
    /// |r| = 1, p reported as 0 by convention.
    pub degenerate: bool,
}
