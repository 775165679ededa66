//! Tab-separated report tables.
//!
//! Every table starts with a tag line `# dualsig-report/1 <kind> manifest=<file>`
//! followed by a header row. Numbers carry 3 decimals, p-values 3 significant
//! figures with a floor of `<0.001`. `NA` marks an undefined value and `-` a
//! column that does not apply to the row.
//!
//! Column orders:
//!
//! * `signals`: domain, n, accuracy, then for confidence and for entropy in
//!   turn r, p, sig, bonferroni, ci_low, ci_high. A `pooled` row follows the
//!   domains when there are at least two.
//! * `strategies`: domain, strategy, w1, w2, n, r, p, sig, bonferroni, ci_low,
//!   ci_high, improvement_pct.
//! * `transfer`: source, target, w1, w2, n, r, r_uncertainty, p, significant,
//!   ci_low, ci_high.
//! * `triage`: domain, tier, n, coverage, accuracy, macro_f1, ci_low, ci_high,
//!   verification_rate, sample_size, effort_reduction. A `total` row closes
//!   each domain.
//!
//! `sig` is `***`, `**` or `*` for p below 0.001, 0.01 and 0.05, else `ns`;
//! `bonferroni` says whether p clears the family-wise corrected level.

use std::fmt::Write;

use dualsig_core::signal::SignalEffectiveness;
use dualsig_core::{CorrelationResult, StrategyTable, Tier, TierPlan, TransferMatrix};

pub const FORMAT: &str = "dualsig-report/1";

pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), num)
}

pub fn p_value(p: f64) -> String {
    if p.is_nan() {
        return "NA".into();
    }
    if p < 0.001 {
        return "<0.001".into();
    }
    let exponent = p.log10().floor() as i32;
    let mut decimals = (2 - exponent).max(0) as usize;
    let mut s = format!("{p:.decimals$}");
    // rounding can carry into the next decade, e.g. 0.0099996 -> 0.01000
    if decimals > 0 && s.parse::<f64>().is_ok_and(|v| v >= 10f64.powi(exponent + 1)) {
        decimals -= 1;
        s = format!("{p:.decimals$}");
    }
    s
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn start(kind: &str, manifest: &str, columns: &[&str]) -> String {
    let mut out = format!("# {FORMAT} {kind} manifest={manifest}\n");
    out.push_str(&columns.join("\t"));
    out.push('\n');
    out
}

fn row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join("\t"));
    out.push('\n');
}

fn correlation_cells(c: &CorrelationResult) -> [String; 6] {
    [
        num(c.r),
        p_value(c.p_value),
        stars(c.p_value).into(),
        yes_no(c.significant_bonferroni).into(),
        num(c.ci_low),
        num(c.ci_high),
    ]
}

/// Signal effectiveness per domain; the pooled row, when present, is last.
pub fn signal_report(rows: &[SignalEffectiveness], manifest: &str) -> String {
    let mut out = start(
        "signals",
        manifest,
        &[
            "domain", "n", "accuracy", "conf_r", "conf_p", "conf_sig", "conf_bonferroni", "conf_ci_low",
            "conf_ci_high", "entropy_r", "entropy_p", "entropy_sig", "entropy_bonferroni", "entropy_ci_low",
            "entropy_ci_high",
        ],
    );
    for r in rows {
        let mut cells = vec![r.domain.clone(), r.n.to_string(), num(r.accuracy)];
        cells.extend(correlation_cells(&r.confidence));
        cells.extend(correlation_cells(&r.entropy));
        row(&mut out, &cells);
    }
    out
}

pub fn strategy_report(tables: &[StrategyTable], manifest: &str) -> String {
    let mut out = start(
        "strategies",
        manifest,
        &[
            "domain", "strategy", "w1", "w2", "n", "r", "p", "sig", "bonferroni", "ci_low", "ci_high",
            "improvement_pct",
        ],
    );
    for t in tables {
        for s in &t.rows {
            let c = correlation_cells(&s.result);
            let mut cells = vec![
                t.domain.clone(),
                s.strategy.as_str().into(),
                num(s.weights.w1()),
                num(s.weights.w2()),
                s.result.n.to_string(),
            ];
            cells.extend(c);
            cells.push(opt_num(s.improvement_pct));
            row(&mut out, &cells);
        }
    }
    out
}

pub fn transfer_report(matrix: &TransferMatrix, manifest: &str) -> String {
    let mut out = start(
        "transfer",
        manifest,
        &[
            "source", "target", "w1", "w2", "n", "r", "r_uncertainty", "p", "significant", "ci_low", "ci_high",
        ],
    );
    for e in &matrix.entries {
        row(
            &mut out,
            &[
                e.source.clone(),
                e.target.clone(),
                num(e.weights.w1()),
                num(e.weights.w2()),
                e.result.n.to_string(),
                num(e.result.r),
                num(e.r_uncertainty),
                p_value(e.result.p_value),
                yes_no(e.significant).into(),
                num(e.result.ci_low),
                num(e.result.ci_high),
            ],
        );
    }
    out
}

/// One triage plan with the per-tier verification sample sizes.
pub struct TriageRows<'a> {
    pub domain: &'a str,
    pub plan: &'a TierPlan,
    pub sample_sizes: [usize; 3],
}

pub fn triage_report(plans: &[TriageRows<'_>], manifest: &str) -> String {
    let mut out = start(
        "triage",
        manifest,
        &[
            "domain", "tier", "n", "coverage", "accuracy", "macro_f1", "ci_low", "ci_high", "verification_rate",
            "sample_size", "effort_reduction",
        ],
    );
    for p in plans {
        let v = p.plan.params.verification_rate();
        let mut n_total = 0;
        let mut correct = 0.0;
        let mut verified = 0.0;
        for (i, tier) in Tier::ALL.into_iter().enumerate() {
            let r = &p.plan.tier_reports[tier];
            n_total += r.n;
            correct += r.accuracy.unwrap_or(0.0) * r.n as f64;
            verified += r.coverage * v[tier];
            row(
                &mut out,
                &[
                    p.domain.into(),
                    tier.as_str().into(),
                    r.n.to_string(),
                    num(r.coverage),
                    opt_num(r.accuracy),
                    opt_num(r.macro_f1),
                    opt_num(r.ci.map(|c| c.0)),
                    opt_num(r.ci.map(|c| c.1)),
                    num(v[tier]),
                    p.sample_sizes[i].to_string(),
                    "-".into(),
                ],
            );
        }
        let accuracy = if n_total > 0 { num(correct / n_total as f64) } else { "NA".into() };
        row(
            &mut out,
            &[
                p.domain.into(),
                "total".into(),
                n_total.to_string(),
                num(1.0),
                accuracy,
                "-".into(),
                "-".into(),
                "-".into(),
                num(verified),
                p.sample_sizes.iter().sum::<usize>().to_string(),
                num(p.plan.effort_reduction),
            ],
        );
    }
    out
}

/// Per-case signals and quality score at full precision.
pub struct ScoreRow<'a> {
    pub aggregate: &'a dualsig_core::CaseAggregate,
    pub scored: &'a dualsig_core::StandardizedCase,
}

pub fn score_table(rows: &[ScoreRow<'_>], manifest: &str) -> String {
    let mut out = start(
        "scores",
        manifest,
        &[
            "domain", "case_id", "models", "consensus", "tie", "entropy", "confidence", "entropy_std",
            "confidence_std", "quality", "correct",
        ],
    );
    for r in rows {
        let a = r.aggregate;
        let correct = match a.correct {
            Some(true) => "1",
            Some(false) => "0",
            None => "NA",
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            a.domain_id,
            a.case_id,
            a.num_models,
            a.consensus_label,
            yes_no(a.tie_flag),
            a.external_entropy,
            a.mean_confidence,
            r.scored.entropy_std,
            r.scored.confidence_std,
            r.scored.quality_score,
            correct
        );
    }
    out
}

/// Case ids selected for human verification, tier by tier.
pub fn sample_table(domain: &str, samples: &dualsig_core::TierTriple<Vec<String>>, manifest: &str) -> String {
    let mut out = start("samples", manifest, &["domain", "tier", "case_id"]);
    for (tier, ids) in samples.iter() {
        for id in ids {
            let _ = writeln!(out, "{domain}\t{tier}\t{id}");
        }
    }
    out
}
