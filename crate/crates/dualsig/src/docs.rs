//! TOML documents for fitted weights and tier plans. Each starts with a
//! `format` key on line 1.

use std::fs;
use std::path::Path;

use dualsig_core::{Tier, TierPlan, TierReport, WeightConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHTS_FORMAT: &str = "dualsig-weights/1";
pub const PLAN_FORMAT: &str = "dualsig-tier-plan/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldoutSection {
    pub fraction: f64,
    pub train_cases: usize,
    pub holdout_cases: usize,
    pub train_r: f64,
    pub holdout_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub format: String,
    pub domain: String,
    pub w1: f64,
    pub w2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_r: Option<f64>,
    pub accuracy: String,
    pub grid_step: f64,
    pub w_max: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout: Option<HoldoutSection>,
}

impl WeightsDoc {
    pub fn new(weights: &WeightConfig, accuracy: &str, grid_step: f64, w_max: f64, seed: u64) -> Self {
        Self {
            format: WEIGHTS_FORMAT.into(),
            domain: weights.source_domain().into(),
            w1: weights.w1(),
            w2: weights.w2(),
            objective_r: weights.objective_r(),
            accuracy: accuracy.into(),
            grid_step,
            w_max,
            seed,
            holdout: None,
        }
    }

    pub fn weights(&self) -> dualsig_core::Result<WeightConfig> {
        let w = WeightConfig::new(self.w1, self.w2, self.domain.clone())?;
        match self.objective_r {
            Some(r) => w.with_objective(r),
            None => Ok(w),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("weights document serializes")
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let doc: WeightsDoc = toml::from_str(text).map_err(|e| Error::schema(path, e.to_string()))?;
        if doc.format != WEIGHTS_FORMAT {
            return Err(Error::schema(
                path,
                format!("unsupported format `{}`, expected `{WEIGHTS_FORMAT}`", doc.format),
            ));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSection {
    pub n: usize,
    pub coverage: f64,
    pub verification_rate: f64,
    pub error_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanWeights {
    pub source: String,
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTiers {
    pub high: TierSection,
    pub medium: TierSection,
    pub low: TierSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub format: String,
    pub domain: String,
    pub seed: u64,
    pub cases: usize,
    pub theta_high: f64,
    pub theta_low: f64,
    pub q_low: f64,
    pub q_high: f64,
    pub unit_cost: f64,
    pub min_tier_coverage: f64,
    pub quantile_step: f64,
    pub verification_cost: f64,
    pub error_cost: f64,
    pub total_cost: f64,
    pub effort_reduction: f64,
    pub non_monotone_accuracy: bool,
    pub weights: PlanWeights,
    pub tiers: PlanTiers,
}

/// Settings of the threshold search that produced a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanContext {
    pub seed: u64,
    pub min_tier_coverage: f64,
    pub quantile_step: f64,
}

impl PlanDoc {
    pub fn new(
        domain: &str,
        plan: &TierPlan,
        weights: &WeightConfig,
        sample_sizes: [usize; 3],
        ctx: PlanContext,
    ) -> Self {
        let v = plan.params.verification_rate();
        let e = plan.params.error_cost();
        let section = |tier: Tier, sample_size: usize| {
            let r: &TierReport = &plan.tier_reports[tier];
            TierSection {
                n: r.n,
                coverage: r.coverage,
                verification_rate: v[tier],
                error_cost: e[tier],
                accuracy: r.accuracy,
                error_rate: r.error_rate,
                macro_f1: r.macro_f1,
                ci_low: r.ci.map(|c| c.0),
                ci_high: r.ci.map(|c| c.1),
                sample_size,
            }
        };
        Self {
            format: PLAN_FORMAT.into(),
            domain: domain.into(),
            seed: ctx.seed,
            cases: plan.tier_reports.iter().map(|(_, r)| r.n).sum(),
            theta_high: plan.theta_high,
            theta_low: plan.theta_low,
            q_low: plan.q_low,
            q_high: plan.q_high,
            unit_cost: plan.params.unit_cost(),
            min_tier_coverage: ctx.min_tier_coverage,
            quantile_step: ctx.quantile_step,
            verification_cost: plan.verification_cost,
            error_cost: plan.error_cost,
            total_cost: plan.total_cost,
            effort_reduction: plan.effort_reduction,
            non_monotone_accuracy: plan.non_monotone_accuracy,
            weights: PlanWeights {
                source: weights.source_domain().into(),
                w1: weights.w1(),
                w2: weights.w2(),
            },
            tiers: PlanTiers {
                high: section(Tier::High, sample_sizes[0]),
                medium: section(Tier::Medium, sample_sizes[1]),
                low: section(Tier::Low, sample_sizes[2]),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan document serializes")
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let doc: PlanDoc = toml::from_str(text).map_err(|e| Error::schema(path, e.to_string()))?;
        if doc.format != PLAN_FORMAT {
            return Err(Error::schema(
                path,
                format!("unsupported format `{}`, expected `{PLAN_FORMAT}`", doc.format),
            ));
        }
        Ok(doc)
    }
}
