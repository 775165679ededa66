mod common;

use dualsig_core::signal::quality_scores;
use dualsig_core::triage::{
    assign_tiers, cost_at_quantiles, effort_reduction, expected_cost, optimize_thresholds,
    plan_at_quantiles, stratified_sample, tier_metrics, ThresholdSearch,
};
use dualsig_core::{
    CaseAggregate, CostParams, Error, SimulationConfig, StandardizedCase, Tier, TierTriple, WeightConfig,
};
use proptest::prelude::*;

fn scored(aggs: &[CaseAggregate]) -> Vec<StandardizedCase> {
    quality_scores(aggs, &WeightConfig::new(1.0, 1.0, "sim").unwrap()).unwrap()
}

fn params(r: (f64, f64, f64)) -> CostParams {
    CostParams::new(1.0, TierTriple::new(r.0, r.1, r.2), CostParams::DEFAULT_VERIFICATION).unwrap()
}

#[test]
fn tercile_split_covers_thirds() {
    let cfg = SimulationConfig { n_cases: 2000, ..common::calibrated(2000, 3) };
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let plan = plan_at_quantiles(&s, &aggs, &cfg.universe(), &CostParams::default(), 1.0 / 3.0, 2.0 / 3.0, 1).unwrap();
    for (_, r) in plan.tier_reports.iter() {
        assert!((r.coverage - 1.0 / 3.0).abs() < 0.02, "{r:?}");
    }
}

#[test]
fn high_tier_beats_low_tier_and_reports_are_consistent() {
    let cfg = common::calibrated(2000, 5);
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let plan = optimize_thresholds(&s, &aggs, &cfg.universe(), &CostParams::default(), &ThresholdSearch::default(), 2).unwrap();
    let reps = &plan.tier_reports;
    assert!(reps.high.accuracy.unwrap() > reps.low.accuracy.unwrap());
    let cov: f64 = reps.iter().map(|(_, r)| r.coverage).sum();
    assert!((cov - 1.0).abs() < 1e-9);
    for (_, r) in reps.iter() {
        let acc = r.accuracy.unwrap();
        assert_eq!(r.error_rate.unwrap(), 1.0 - acc);
        let (lo, hi) = r.ci.unwrap();
        assert!(lo <= acc && acc <= hi);
        assert!((0.0..=1.0).contains(&r.macro_f1.unwrap()));
        assert!(r.coverage >= 0.10 - 1e-12);
    }
    assert!(plan.theta_low < plan.theta_high);
    assert_eq!(plan.total_cost, plan.verification_cost + plan.error_cost);
}

#[test]
fn optimizer_never_loses_to_terciles_or_any_grid_pair() {
    for seed in 0..5 {
        let cfg = common::calibrated(600, 40 + seed);
        let aggs = common::aggregates(&cfg);
        let s = scored(&aggs);
        let p = CostParams::default();
        let search = ThresholdSearch::default();
        let plan = optimize_thresholds(&s, &aggs, &cfg.universe(), &p, &search, 0).unwrap();
        for (lo, hi) in search.candidates().unwrap() {
            if let Some(c) = cost_at_quantiles(&s, &aggs, &p, lo, hi).unwrap() {
                let reports = plan_at_quantiles(&s, &aggs, &cfg.universe(), &p, lo, hi, 0).unwrap().tier_reports;
                let feasible = reports.iter().all(|(_, r)| r.coverage >= 0.10 - 1e-12);
                if feasible {
                    assert!(plan.total_cost <= c.total, "({lo}, {hi})");
                }
            }
        }
    }
}

#[test]
fn cost_limit_behaviour() {
    let cfg = common::calibrated(1000, 8);
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let u = cfg.universe();
    let search = ThresholdSearch::default();

    // negligible error cost: cheapest plan maximizes the high tier
    let cheap = optimize_thresholds(&s, &aggs, &u, &params((1e-12, 1e-12, 1e-12)), &search, 0).unwrap();
    assert!((cheap.tier_reports.high.coverage - 0.80).abs() < 0.01, "{:?}", cheap.tier_reports.high);

    // overwhelming error cost: most cases end up in the heavily verified tier
    let costly = optimize_thresholds(&s, &aggs, &u, &params((1e6, 1e6, 1e6)), &search, 0).unwrap();
    assert!((costly.tier_reports.low.coverage - 0.80).abs() < 0.01, "{:?}", costly.tier_reports.low);
}

#[test]
fn uniform_error_cost_scaling_raises_verification() {
    let cfg = common::calibrated(1000, 9);
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let u = cfg.universe();
    let mut last = 0.0;
    for scale in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0] {
        let plan = optimize_thresholds(&s, &aggs, &u, &params((2.0 * scale, 3.0 * scale, 5.0 * scale)), &ThresholdSearch::default(), 0).unwrap();
        let verified = 1.0 - plan.effort_reduction;
        assert!(verified >= last - 1e-12, "scale {scale}");
        last = verified;
    }
}

#[test]
fn infeasible_floor() {
    let cfg = common::calibrated(300, 1);
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let search = ThresholdSearch { grid_step: 0.5, ..ThresholdSearch::default() };
    let search = ThresholdSearch { include_terciles: false, ..search };
    let err = optimize_thresholds(&s, &aggs, &cfg.universe(), &CostParams::default(), &search, 0).unwrap_err();
    assert!(matches!(err, Error::Infeasible { min_coverage } if min_coverage == 0.10));
}

#[test]
fn empty_tier_is_reported() {
    let cfg = common::calibrated(50, 1);
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let a = assign_tiers(&s, 1e9, -1e9).unwrap();
    let reps = tier_metrics(&a, &aggs, &cfg.universe(), 0).unwrap();
    assert_eq!(reps.high.n, 0);
    assert_eq!(reps.high.accuracy, None);
    assert_eq!(reps.high.ci, None);
    assert_eq!(reps.medium.n, 50);
    let cost = expected_cost(&reps, &CostParams::default()).unwrap();
    assert_eq!(cost.total, cost.verification_cost + cost.error_cost);
}

#[test]
fn all_correct_tier() {
    let cfg = common::calibrated(80, 2);
    let mut aggs = common::aggregates(&cfg);
    for a in &mut aggs {
        a.correct = Some(true);
        a.true_label = Some(a.consensus_label.clone());
    }
    let s = scored(&aggs);
    let a = assign_tiers(&s, 0.0, -0.5).unwrap();
    let reps = tier_metrics(&a, &aggs, &cfg.universe(), 0).unwrap();
    assert_eq!(reps.high.accuracy, Some(1.0));
    assert_eq!(reps.high.error_rate, Some(0.0));
    assert_eq!(reps.high.ci, Some((1.0, 1.0)));
}

#[test]
fn samples_are_deterministic_subsets() {
    let cfg = common::calibrated(500, 3);
    let aggs = common::aggregates(&cfg);
    let s = scored(&aggs);
    let a = assign_tiers(&s, 0.5, -0.5).unwrap();
    let p = CostParams::default();
    let one = stratified_sample(&a, &p, 77);
    assert_eq!(one, stratified_sample(&a, &p, 77));
    assert_ne!(one, stratified_sample(&a, &p, 78));
    for tier in Tier::ALL {
        let members = a.members(tier);
        let picked = &one[tier];
        assert!(picked.iter().all(|id| members.contains(&id.as_str())));
        let expected = (p.verification_rate()[tier] * members.len() as f64 - 1e-9).ceil() as usize;
        assert_eq!(picked.len(), expected);
    }
}

proptest! {
    #[test]
    fn assignment_partitions(qs in prop::collection::vec(-5.0f64..5.0, 1..200), lo in -3.0f64..3.0, gap in 1e-6f64..3.0) {
        let s: Vec<StandardizedCase> = qs.iter().enumerate().map(|(i, &q)| StandardizedCase {
            case_id: format!("c{i}"), entropy_std: 0.0, confidence_std: 0.0, quality_score: q,
        }).collect();
        let a = assign_tiers(&s, lo + gap, lo).unwrap();
        let c = a.counts();
        prop_assert_eq!(c.high + c.medium + c.low, qs.len());
    }

    #[test]
    fn effort_reduction_bounds(h in 0.0f64..1.0, m in 0.0f64..1.0, v in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0)) {
        let total = h + m + 1.0;
        let cov = TierTriple::new(h / total, m / total, 1.0 / total);
        let er = effort_reduction(&cov, &TierTriple::new(v.0, v.1, v.2));
        prop_assert!((0.0..=1.0).contains(&er));
        prop_assert_eq!(effort_reduction(&cov, &TierTriple::new(1.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn cost_identity(c in (0.0f64..1.0, 0.0f64..1.0), e in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), r in (0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0)) {
        let total = c.0 + c.1 + 1.0;
        let cov = TierTriple::new(c.0 / total, c.1 / total, 1.0 / total);
        let p = CostParams::new(1.3, TierTriple::new(r.0, r.1, r.2), CostParams::DEFAULT_VERIFICATION).unwrap();
        let b = dualsig_core::triage::expected_cost_from(&cov, &TierTriple::new(e.0, e.1, e.2), &p).unwrap();
        prop_assert_eq!(b.total, b.verification_cost + b.error_cost);
    }
}
