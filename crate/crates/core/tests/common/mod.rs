#![allow(dead_code)]

use std::collections::BTreeMap;

use dualsig_core::signal::aggregate_cases;
use dualsig_core::simulate::simulate;
use dualsig_core::{CaseAggregate, SimulationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn calibrated(n_cases: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        n_cases,
        seed,
        ..SimulationConfig::default()
    }
}

pub fn aggregates(cfg: &SimulationConfig) -> Vec<CaseAggregate> {
    let records = simulate(cfg).unwrap();
    aggregate_cases(&records, &cfg.universe()).unwrap()
}

/// Hand-built aggregates where correctness follows `confidence` and entropy is
/// independent noise.
pub fn confidence_driven(n: usize, seed: u64) -> Vec<CaseAggregate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let conf: f64 = rng.gen_range(0.51..1.0);
            let entropy: f64 = rng.gen_range(0.0..1.0);
            let correct = rng.gen::<f64>() < (conf - 0.51) / 0.49;
            CaseAggregate {
                case_id: format!("h{i:05}"),
                domain_id: "hand".into(),
                label_counts: BTreeMap::new(),
                num_models: 5,
                num_classes: 2,
                external_entropy: entropy,
                mean_confidence: conf,
                consensus_label: "c0".into(),
                tie_flag: false,
                true_label: Some(if correct { "c0" } else { "c1" }.into()),
                correct: Some(correct),
                model_accuracy: Some(if correct { 1.0 } else { 0.0 }),
            }
        })
        .collect()
}
