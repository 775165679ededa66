mod common;

use std::collections::BTreeMap;

use dualsig_core::optimize::{
    optimize_weights, optimize_weights_holdout, score_correlation, strategy_table,
    transfer_evaluate, transfer_matrix, FitOptions,
};
use dualsig_core::{AccuracyMode, Error, SimulationConfig, Strategy, WeightConfig};

fn opts(seed: u64) -> FitOptions {
    FitOptions {
        seed,
        ..FitOptions::default()
    }
}

#[test]
fn optimized_dominates_baselines() {
    for seed in 0..5 {
        let aggs = common::aggregates(&common::calibrated(400, seed));
        let table = strategy_table(&aggs, &opts(seed)).unwrap();
        let opt = table.row(Strategy::Optimized).result.r;
        for s in [Strategy::ConfidenceOnly, Strategy::EntropyOnly, Strategy::Equal] {
            assert!(opt >= table.row(s).result.r, "seed {seed}: {s:?}");
        }
        assert_eq!(table.optimized_weights().objective_r(), Some(opt));
        let eq = &table.row(Strategy::Equal).weights;
        assert_eq!((eq.w1(), eq.w2()), (1.0, 1.0));
        assert_eq!(table.row(Strategy::ConfidenceOnly).improvement_pct, Some(0.0));
    }
}

#[test]
fn noise_confidence_leads_to_entropy_weighting() {
    let cfg = SimulationConfig {
        n_cases: 2000,
        confidence_calibration: 0.0,
        confidence_noise: 0.5,
        seed: 31,
        ..SimulationConfig::default()
    };
    let w = optimize_weights(&common::aggregates(&cfg), &opts(1)).unwrap();
    assert!(w.w2() <= 0.1 * w.w1(), "({}, {})", w.w1(), w.w2());
}

#[test]
fn entropy_only_is_flat_when_only_confidence_informs() {
    let aggs = common::confidence_driven(2000, 9);
    let table = strategy_table(&aggs, &opts(2)).unwrap();
    assert!(table.row(Strategy::EntropyOnly).result.r.abs() < 0.07);
    assert!(table.row(Strategy::ConfidenceOnly).result.r > 0.2);
}

#[test]
fn deterministic_and_tie_broken_toward_small_weights() {
    let aggs = common::aggregates(&common::calibrated(300, 8));
    let a = optimize_weights(&aggs, &opts(1)).unwrap();
    let b = optimize_weights(&aggs, &opts(99)).unwrap();
    assert_eq!(a, b);
    // the winner's direction cannot be represented by a smaller grid point
    let (i, j) = ((a.w1() * 100.0).round() as u64, (a.w2() * 100.0).round() as u64);
    let g = (1..=i.max(j)).rev().find(|g| i % g == 0 && j % g == 0).unwrap_or(1);
    let is_baseline = [(100, 0), (0, 100), (100, 100)].contains(&(i, j));
    assert!(g == 1 || is_baseline, "({i}, {j}) shares factor {g}");
}

#[test]
fn standardized_inputs_give_same_ranking() {
    let aggs = common::aggregates(&common::calibrated(300, 12));
    let w = optimize_weights(&aggs, &opts(0)).unwrap();
    let mut prestd = aggs.clone();
    let h = dualsig_core::signal::standardize(&aggs.iter().map(|a| a.external_entropy).collect::<Vec<_>>()).unwrap();
    let c = dualsig_core::signal::standardize(&aggs.iter().map(|a| a.mean_confidence).collect::<Vec<_>>()).unwrap();
    for ((a, h), c) in prestd.iter_mut().zip(h).zip(c) {
        a.external_entropy = h;
        a.mean_confidence = c;
    }
    let w2 = optimize_weights(&prestd, &opts(0)).unwrap();
    assert_eq!((w.w1(), w.w2()), (w2.w1(), w2.w2()));
}

#[test]
fn degenerate_inputs_error() {
    let mut aggs = common::aggregates(&common::calibrated(50, 1));
    for a in &mut aggs {
        a.correct = Some(true);
    }
    assert!(matches!(optimize_weights(&aggs, &opts(0)), Err(Error::UndefinedCorrelation(_))));
    let few = common::aggregates(&common::calibrated(5, 1));
    assert!(matches!(optimize_weights(&few, &opts(0)), Err(Error::InsufficientData { .. })));
}

#[test]
fn identity_transfer_reproduces_objective() {
    let aggs = common::aggregates(&common::calibrated(500, 5));
    let w = optimize_weights(&aggs, &opts(0)).unwrap();
    let t = transfer_evaluate(&w, &aggs, &opts(0)).unwrap();
    assert_eq!(Some(t.result.r), w.objective_r());
    assert_eq!(t.r_uncertainty, -t.result.r);
}

fn three_domains() -> BTreeMap<String, Vec<dualsig_core::CaseAggregate>> {
    let specs = [("alpha", 0.90, 2), ("beta", 0.85, 3), ("gamma", 0.80, 4)];
    specs
        .iter()
        .enumerate()
        .map(|(i, &(name, base, k))| {
            let cfg = SimulationConfig {
                domain_id: name.into(),
                n_cases: 600,
                n_classes: k,
                base_accuracy: base,
                seed: 100 + i as u64,
                ..SimulationConfig::default()
            };
            (name.to_string(), common::aggregates(&cfg))
        })
        .collect()
}

#[test]
fn transfer_matrix_layout_and_success() {
    let domains = three_domains();
    let m = transfer_matrix(&domains, &opts(7)).unwrap();
    assert_eq!(m.entries.len(), 9);
    assert_eq!(m.weights.len(), 4);
    assert!(m.entries[6..].iter().all(|e| e.source == WeightConfig::GLOBAL));
    assert!(m.entries.iter().all(|e| e.source != e.target));
    assert_eq!(m.success_rate(), 1.0);
    assert_eq!(m, transfer_matrix(&domains, &opts(7)).unwrap());
}

#[test]
fn identical_domains_transfer_symmetrically() {
    let aggs = common::aggregates(&common::calibrated(400, 2));
    let relabel = |name: &str| {
        aggs.iter()
            .cloned()
            .map(|mut a| {
                a.domain_id = name.into();
                a
            })
            .collect::<Vec<_>>()
    };
    let domains: BTreeMap<_, _> = [("a".to_string(), relabel("a")), ("b".to_string(), relabel("b"))].into();
    let m = transfer_matrix(&domains, &opts(3)).unwrap();
    assert_eq!(m.entries.len(), 4);
    assert!((m.entries[0].result.r - m.entries[1].result.r).abs() < 1e-12);
}

#[test]
fn transfer_rejects_reserved_and_single_domain() {
    let aggs = common::aggregates(&common::calibrated(50, 2));
    let one: BTreeMap<_, _> = [("a".to_string(), aggs.clone())].into();
    assert!(transfer_matrix(&one, &opts(0)).is_err());
    let reserved: BTreeMap<_, _> = [("a".to_string(), aggs.clone()), ("global".to_string(), aggs)].into();
    assert!(transfer_matrix(&reserved, &opts(0)).is_err());
}

#[test]
fn model_mean_accuracy_mode() {
    let aggs = common::aggregates(&common::calibrated(400, 6));
    let o = FitOptions {
        accuracy: AccuracyMode::ModelMean,
        ..opts(0)
    };
    let w = optimize_weights(&aggs, &o).unwrap();
    let r = score_correlation(&aggs, &w, AccuracyMode::ModelMean).unwrap();
    assert_eq!(Some(r), w.objective_r());
    assert!(r > 0.0);
}

#[test]
fn holdout_split() {
    let aggs = common::aggregates(&common::calibrated(500, 6));
    let fit = optimize_weights_holdout(&aggs, 0.3, &opts(4)).unwrap();
    assert_eq!(fit.train_cases + fit.holdout_cases, 500);
    assert_eq!(fit.holdout_cases, 150);
    assert!(fit.holdout_r > 0.0);
    assert!(optimize_weights_holdout(&aggs, 1.0, &opts(4)).is_err());
}
