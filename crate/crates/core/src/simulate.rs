//! Synthetic ensemble annotation data with known ground truth.
//!
//! Each case draws a latent difficulty `d ~ U[0, 1]` and a uniform true label.
//! Every model is correct with probability `base_accuracy - difficulty_slope * d`
//! and otherwise picks a uniformly random wrong label. The reported risk is
//! `clamp(0.50 + 0.49 * (confidence_calibration * d + noise), 0.50, 0.99)` with
//! `noise ~ U[-confidence_noise, confidence_noise]`. Difficulty thus couples
//! disagreement, confidence and accuracy.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{LabelUniverse, PredictionRecord, RISK_MAX, RISK_MIN};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub domain_id: String,
    pub n_cases: usize,
    pub n_models: usize,
    pub n_classes: usize,
    pub base_accuracy: f64,
    pub difficulty_slope: f64,
    pub confidence_calibration: f64,
    pub confidence_noise: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    /// The calibrated configuration: strong difficulty coupling on both signals.
    fn default() -> Self {
        Self {
            domain_id: "sim".into(),
            n_cases: 2000,
            n_models: 5,
            n_classes: 2,
            base_accuracy: 0.9,
            difficulty_slope: 0.4,
            confidence_calibration: 1.0,
            confidence_noise: 0.05,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.domain_id.is_empty() {
            return bad("domain id must not be empty".into());
        }
        if self.n_cases == 0 {
            return bad("n_cases must be positive".into());
        }
        if self.n_models < 2 {
            return bad(alloc::format!("n_models must be >= 2, got {}", self.n_models));
        }
        if self.n_classes < 2 {
            return bad(alloc::format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if !(self.base_accuracy > 0.0 && self.base_accuracy < 1.0) {
            return bad(alloc::format!("base_accuracy {} outside (0, 1)", self.base_accuracy));
        }
        if !(self.difficulty_slope >= 0.0) {
            return bad(alloc::format!("difficulty_slope {} must be >= 0", self.difficulty_slope));
        }
        // d is drawn from [0, 1), so equality still leaves every sampled case
        // strictly above chance
        if !(self.base_accuracy - self.difficulty_slope >= 1.0 / self.n_classes as f64) {
            return bad(alloc::format!(
                "base_accuracy - difficulty_slope = {} is below chance 1/{}",
                self.base_accuracy - self.difficulty_slope,
                self.n_classes
            ));
        }
        if !(0.0..=1.0).contains(&self.confidence_calibration) {
            return bad(alloc::format!(
                "confidence_calibration {} outside [0, 1]",
                self.confidence_calibration
            ));
        }
        if !(self.confidence_noise >= 0.0 && self.confidence_noise.is_finite()) {
            return bad(alloc::format!("confidence_noise {} must be >= 0", self.confidence_noise));
        }
        Ok(())
    }

    /// Class labels `c0 .. c{k-1}`.
    pub fn label(&self, i: usize) -> String {
        alloc::format!("c{i}")
    }

    pub fn universe(&self) -> LabelUniverse {
        LabelUniverse::new((0..self.n_classes).map(|i| self.label(i)))
            .expect("simulator labels are distinct and non-empty")
    }
}

/// Generates `n_cases * n_models` records, case-major, deterministic per seed.
pub fn simulate(config: &SimulationConfig) -> Result<Vec<PredictionRecord>> {
    config.validate()?;
    let mut stream = rng::stream(config.seed);
    let width = config.n_cases.to_string().len().max(5);
    let k = config.n_classes;
    let mut out = Vec::with_capacity(config.n_cases * config.n_models);
    for case in 0..config.n_cases {
        let case_id = alloc::format!("case-{case:0width$}");
        let difficulty = rng::unit(&mut stream);
        let truth = rng::below(&mut stream, k);
        let p_correct = config.base_accuracy - config.difficulty_slope * difficulty;
        for model in 0..config.n_models {
            let predicted = if rng::unit(&mut stream) < p_correct {
                truth
            } else {
                let wrong = rng::below(&mut stream, k - 1);
                if wrong >= truth {
                    wrong + 1
                } else {
                    wrong
                }
            };
            let noise = config.confidence_noise * (2.0 * rng::unit(&mut stream) - 1.0);
            let risk = (0.50 + 0.49 * (config.confidence_calibration * difficulty + noise))
                .clamp(RISK_MIN, RISK_MAX);
            out.push(PredictionRecord::new(
                case_id.clone(),
                alloc::format!("m{model}"),
                config.domain_id.clone(),
                config.label(predicted),
                risk,
                Some(config.label(truth)),
            )?);
        }
    }
    Ok(out)
}

/// Permutes true labels across cases, breaking any link between predictions
/// and truth while keeping the label marginals.
pub fn null_shuffle(records: &[PredictionRecord], seed: u64) -> Result<Vec<PredictionRecord>> {
    if records.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut truth_by_case: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    for r in records {
        let prev = truth_by_case.insert(r.case_id(), r.true_label());
        if prev.is_some_and(|p| p != r.true_label()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "case `{}` has conflicting true labels",
                r.case_id()
            )));
        }
    }
    let mut labels: Vec<Option<&str>> = truth_by_case.values().copied().collect();
    rng::shuffle(&mut rng::stream(seed), &mut labels);
    let remap: BTreeMap<&str, Option<String>> = truth_by_case
        .keys()
        .zip(labels)
        .map(|(&case, l)| (case, l.map(str::to_string)))
        .collect();
    Ok(records
        .iter()
        .map(|r| r.clone().with_true_label(remap[r.case_id()].clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_configs_at_or_below_chance() {
        let cfg = SimulationConfig {
            base_accuracy: 0.7,
            difficulty_slope: 0.25,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimulationConfig {
            n_models: 1,
            ..Default::default()
        };
        assert!(simulate(&cfg).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SimulationConfig {
            n_cases: 50,
            ..Default::default()
        };
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let other = SimulationConfig { seed: 1, ..cfg.clone() };
        assert_ne!(simulate(&cfg).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn no_signal_config_has_constant_risk() {
        let cfg = SimulationConfig {
            n_cases: 100,
            difficulty_slope: 0.0,
            confidence_calibration: 0.0,
            confidence_noise: 0.0,
            ..Default::default()
        };
        assert!(simulate(&cfg).unwrap().iter().all(|r| r.risk() == 0.50));
    }

    #[test]
    fn shuffle_keeps_marginals_and_predictions() {
        let cfg = SimulationConfig {
            n_cases: 200,
            n_classes: 3,
            ..Default::default()
        };
        let recs = simulate(&cfg).unwrap();
        let shuffled = null_shuffle(&recs, 9).unwrap();
        let marginal = |rs: &[PredictionRecord]| {
            let mut m: BTreeMap<String, usize> = BTreeMap::new();
            for r in rs {
                *m.entry(r.true_label().unwrap().to_string()).or_default() += 1;
            }
            m
        };
        assert_eq!(marginal(&recs), marginal(&shuffled));
        for (a, b) in recs.iter().zip(&shuffled) {
            assert_eq!(a.predicted_label(), b.predicted_label());
            assert_eq!(a.risk(), b.risk());
        }
        assert!(null_shuffle(&[], 1).is_err());
    }
}
