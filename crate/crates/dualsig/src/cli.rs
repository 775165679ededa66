//! The `dualsig` command line.
//!
//! Every subcommand takes `--seed` and `--out DIR` and writes a manifest next to
//! its outputs. The manifest records the full option set with absolute paths,
//! so `dualsig report --manifest DIR/manifest.toml` reruns the command.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dualsig_core::optimize::{optimize_weights_holdout, strategy_table, transfer_matrix, FitOptions};
use dualsig_core::signal::{quality_scores, signal_effectiveness};
use dualsig_core::triage::{assign_tiers, optimize_thresholds, stratified_sample};
use dualsig_core::{
    AccuracyMode, CaseAggregate, CostParams, GridSpec, SimulationConfig, ThresholdSearch, TierTriple,
    WeightConfig,
};
use serde::{Deserialize, Serialize};

use crate::docs::{HoldoutSection, PlanContext, PlanDoc, WeightsDoc};
use crate::error::{Context, Error, Result};
use crate::manifest::{self, CostSection, RunManifest};
use crate::predictions::{self, PredictionSet};
use crate::report;
use crate::table::TableMapping;

#[derive(Debug, Parser)]
#[command(name = "dualsig", version, about = "Dual-signal reliability scoring and verification triage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic prediction file.
    Simulate(SimulateArgs),
    /// Per-case signals and quality scores, plus signal effectiveness when labels are present.
    Score(ScoreArgs),
    /// Fit signal weights and compare them with the fixed strategies.
    Optimize(OptimizeArgs),
    /// Cross-domain weight transfer matrix.
    Transfer(TransferArgs),
    /// Cost-optimal three-tier verification plan and sample lists.
    Triage(TriageArgs),
    /// Rerun the command recorded in a manifest.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Prediction files; repeat for several.
    #[arg(short, long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Read the inputs as delimited tables laid out by this mapping document.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Accuracy target: consensus correctness or mean per-model correctness.
    #[arg(long, default_value = "consensus", value_parser = ["consensus", "model_mean"])]
    pub accuracy: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WeightArgs {
    /// Weights document written by `optimize`.
    #[arg(long, conflicts_with_all = ["w1", "w2"], required_unless_present_all = ["w1", "w2"])]
    pub weights: Option<PathBuf>,
    /// Entropy weight.
    #[arg(long, requires = "w2", allow_hyphen_values = true)]
    pub w1: Option<f64>,
    /// Confidence weight.
    #[arg(long, requires = "w1", allow_hyphen_values = true)]
    pub w2: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 2.0)]
    pub w_max: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value = "sim")]
    pub domain: String,
    #[arg(long, default_value_t = 2000)]
    pub n_cases: usize,
    #[arg(long, default_value_t = 5)]
    pub n_models: usize,
    #[arg(long, default_value_t = 2)]
    pub n_classes: usize,
    #[arg(long, default_value_t = 0.9)]
    pub base_accuracy: f64,
    #[arg(long, default_value_t = 0.4)]
    pub difficulty_slope: f64,
    #[arg(long, default_value_t = 1.0)]
    pub confidence_calibration: f64,
    #[arg(long, default_value_t = 0.05)]
    pub confidence_noise: f64,
    /// Also permute the truth labels across cases, destroying any signal.
    #[arg(long)]
    pub null_shuffle: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Fit on a random share of cases and report the correlation on the rest.
    #[arg(long)]
    pub holdout: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TransferArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TriageArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub weights: WeightArgs,
    /// Domain to plan when the inputs hold several.
    #[arg(long)]
    pub domain: Option<String>,
    /// Verification rates for the high, medium and low tiers.
    #[arg(long, value_delimiter = ',', default_values_t = [0.15, 0.60, 0.95])]
    pub verification: Vec<f64>,
    /// Cost of verifying one case.
    #[arg(long, default_value_t = 1.0)]
    pub unit_cost: f64,
    /// Cost of an unverified error in the high, medium and low tiers.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 5.0])]
    pub error_cost: Vec<f64>,
    /// Smallest share of cases every tier must hold.
    #[arg(long, default_value_t = 0.10)]
    pub min_coverage: f64,
    /// Spacing of the threshold quantile grid.
    #[arg(long, default_value_t = 0.05)]
    pub quantile_step: f64,
    /// Leave the tercile split out of the threshold candidates.
    #[arg(long)]
    pub no_terciles: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write; defaults to the manifest's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dualsig: {} error: {}", e.category().as_str(), e.to_string().trim_end());
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Report(a) => replay(a),
        other => execute(other, None),
    }
}

fn execute(command: &Command, replayed_from: Option<&Path>) -> Result<()> {
    let command = absolutize(command)?;
    match &command {
        Command::Simulate(a) => simulate(a, replayed_from),
        Command::Score(a) => score(a, replayed_from),
        Command::Optimize(a) => optimize(a, replayed_from),
        Command::Transfer(a) => transfer(a, replayed_from),
        Command::Triage(a) => triage(a, replayed_from),
        Command::Report(_) => Err(Error::Usage("a manifest cannot record `report` itself".into())),
    }
}

fn replay(a: &ReportArgs) -> Result<()> {
    let m = RunManifest::load(&a.manifest)?;
    let out = match &a.out {
        Some(o) => o.clone(),
        None => a.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let inv = toml::Value::Table(m.invocation.clone());
    let decode = |e: toml::de::Error| Error::schema(&a.manifest, format!("invocation: {e}"));
    let mut command = match m.command.as_str() {
        "simulate" => Command::Simulate(inv.try_into().map_err(decode)?),
        "score" => Command::Score(inv.try_into().map_err(decode)?),
        "optimize" => Command::Optimize(inv.try_into().map_err(decode)?),
        "transfer" => Command::Transfer(inv.try_into().map_err(decode)?),
        "triage" => Command::Triage(inv.try_into().map_err(decode)?),
        other => return Err(Error::schema(&a.manifest, format!("unknown command `{other}`"))),
    };
    *common_mut(&mut command) = Common {
        seed: m.seed,
        out,
    };
    let source = fs::canonicalize(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
    execute(&command, Some(&source))
}

fn common_mut(command: &mut Command) -> &mut Common {
    match command {
        Command::Simulate(a) => &mut a.common,
        Command::Score(a) => &mut a.common,
        Command::Optimize(a) => &mut a.common,
        Command::Transfer(a) => &mut a.common,
        Command::Triage(a) => &mut a.common,
        Command::Report(_) => unreachable!("report has no common options"),
    }
}

fn canonical(p: &Path) -> Result<PathBuf> {
    fs::canonicalize(p).map_err(|e| Error::io(p, e))
}

/// Rewrites every input path as an absolute path so the manifest replays
/// from anywhere.
fn absolutize(command: &Command) -> Result<Command> {
    let mut c = command.clone();
    let fix_inputs = |i: &mut InputArgs| -> Result<()> {
        for p in &mut i.inputs {
            *p = canonical(p)?;
        }
        if let Some(m) = &mut i.mapping {
            *m = canonical(m)?;
        }
        Ok(())
    };
    let fix_weights = |w: &mut WeightArgs| -> Result<()> {
        if let Some(p) = &mut w.weights {
            *p = canonical(p)?;
        }
        Ok(())
    };
    match &mut c {
        Command::Simulate(_) | Command::Report(_) => {}
        Command::Score(a) => {
            fix_inputs(&mut a.input)?;
            fix_weights(&mut a.weights)?;
        }
        Command::Optimize(a) => fix_inputs(&mut a.input)?,
        Command::Transfer(a) => fix_inputs(&mut a.input)?,
        Command::Triage(a) => {
            fix_inputs(&mut a.input)?;
            fix_weights(&mut a.weights)?;
        }
    }
    let common = common_mut(&mut c);
    fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    common.out = canonical(&common.out)?;
    Ok(c)
}

/// Collects outputs of one run and writes its manifest last.
struct Run {
    out: PathBuf,
    manifest_name: String,
    manifest: RunManifest,
}

impl Run {
    fn new<A: Serialize>(command: &str, common: &Common, args: &A, replayed_from: Option<&Path>) -> Result<Self> {
        Self::named(command, common, args, replayed_from, manifest::FILE_NAME)
    }

    fn named<A: Serialize>(
        command: &str,
        common: &Common,
        args: &A,
        replayed_from: Option<&Path>,
        manifest_name: &str,
    ) -> Result<Self> {
        let invocation = match toml::Value::try_from(args) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(Error::Usage("options cannot be recorded".into())),
        };
        let mut manifest = RunManifest::new(command, common.seed, invocation);
        manifest.replayed_from = replayed_from.map(|p| p.display().to_string());
        Ok(Self {
            out: common.out.clone(),
            manifest_name: manifest_name.into(),
            manifest,
        })
    }

    fn inputs(&mut self, input: &InputArgs) {
        self.manifest.inputs = input.inputs.iter().map(|p| p.display().to_string()).collect();
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        crate::write_atomic(&self.out.join(name), contents.as_bytes())?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        crate::write_atomic(&self.out.join(&self.manifest_name), self.manifest.to_toml().as_bytes())
    }
}

fn accuracy_mode(input: &InputArgs) -> Result<AccuracyMode> {
    input
        .accuracy
        .parse()
        .map_err(|e: dualsig_core::Error| Error::Usage(e.to_string()))
}

fn load_inputs(input: &InputArgs) -> Result<PredictionSet> {
    match &input.mapping {
        Some(m) => {
            let mapping = TableMapping::load(m)?;
            predictions::load_all(&input.inputs, |p| mapping.read(p))
        }
        None => predictions::load_all(&input.inputs, predictions::load_predictions),
    }
}

fn resolve_weights(w: &WeightArgs) -> Result<WeightConfig> {
    match (&w.weights, w.w1, w.w2) {
        (Some(path), _, _) => {
            let doc = WeightsDoc::load(path)?;
            doc.weights().context(|| path.display().to_string())
        }
        (None, Some(w1), Some(w2)) => WeightConfig::new(w1, w2, "cli").context(|| "--w1/--w2".into()),
        _ => Err(Error::Usage("pass --weights or both --w1 and --w2".into())),
    }
}

fn grid(g: &GridArgs) -> Result<GridSpec> {
    let spec = GridSpec {
        step: g.grid_step,
        w_max: g.w_max,
    };
    spec.points_per_axis()
        .map_err(|e| Error::Usage(format!("--grid-step/--w-max: {e}")))?;
    Ok(spec)
}

fn pooled(domains: &BTreeMap<String, Vec<CaseAggregate>>) -> Vec<CaseAggregate> {
    domains.values().flatten().cloned().collect()
}

fn simulate(a: &SimulateArgs, replayed_from: Option<&Path>) -> Result<()> {
    let cfg = SimulationConfig {
        domain_id: a.domain.clone(),
        n_cases: a.n_cases,
        n_models: a.n_models,
        n_classes: a.n_classes,
        base_accuracy: a.base_accuracy,
        difficulty_slope: a.difficulty_slope,
        confidence_calibration: a.confidence_calibration,
        confidence_noise: a.confidence_noise,
        seed: a.common.seed,
    };
    let mut records = dualsig_core::simulate::simulate(&cfg).context(|| "simulate".into())?;
    if a.null_shuffle {
        records = dualsig_core::simulate::null_shuffle(&records, a.common.seed).context(|| "null shuffle".into())?;
    }
    let universes = BTreeMap::from([(a.domain.clone(), cfg.universe())]);
    let name = format!("{}.jsonl", a.domain);
    let set = PredictionSet::from_records(universes, records, Path::new(&name))?;
    let mut run = Run::named("simulate", &a.common, a, replayed_from, &format!("{}.manifest.toml", a.domain))?;
    run.write(&name, &predictions::to_string(&set))?;
    run.finish()
}

fn score(a: &ScoreArgs, replayed_from: Option<&Path>) -> Result<()> {
    let mode = accuracy_mode(&a.input)?;
    let weights = resolve_weights(&a.weights)?;
    let mut run = Run::new("score", &a.common, a, replayed_from)?;
    run.inputs(&a.input);
    run.manifest.weights = Some(match &a.weights.weights {
        Some(p) => p.display().to_string(),
        None => format!("w1={} w2={}", weights.w1(), weights.w2()),
    });
    let domains = load_inputs(&a.input)?.aggregate()?;

    let mut scored = Vec::new();
    for (domain, aggs) in &domains {
        scored.push(quality_scores(aggs, &weights).context(|| format!("domain `{domain}`"))?);
    }
    let rows: Vec<report::ScoreRow<'_>> = domains
        .values()
        .zip(&scored)
        .flat_map(|(aggs, s)| aggs.iter().zip(s).map(|(aggregate, scored)| report::ScoreRow { aggregate, scored }))
        .collect();
    let manifest_name = run.manifest_name.clone();
    run.write("scores.tsv", &report::score_table(&rows, &manifest_name))?;

    let labelled = domains.values().flatten().all(|c| c.true_label.is_some());
    if labelled {
        let m_tests = 2 * domains.len();
        let mut rows = Vec::new();
        for (domain, aggs) in &domains {
            rows.push(
                signal_effectiveness(domain, aggs, mode, m_tests, a.common.seed)
                    .context(|| format!("domain `{domain}`"))?,
            );
        }
        if domains.len() >= 2 {
            rows.push(
                signal_effectiveness("pooled", &pooled(&domains), mode, m_tests, a.common.seed)
                    .context(|| "pooled".into())?,
            );
        }
        run.write("signals.tsv", &report::signal_report(&rows, &manifest_name))?;
    }
    run.finish()
}

fn optimize(a: &OptimizeArgs, replayed_from: Option<&Path>) -> Result<()> {
    let opts = FitOptions {
        grid: grid(&a.grid)?,
        accuracy: accuracy_mode(&a.input)?,
        m_tests: 1,
        seed: a.common.seed,
    };
    let mut run = Run::new("optimize", &a.common, a, replayed_from)?;
    run.inputs(&a.input);
    let domains = load_inputs(&a.input)?.aggregate()?;

    let mut sets: Vec<(String, Vec<CaseAggregate>)> = domains.clone().into_iter().collect();
    if domains.len() >= 2 {
        sets.push((WeightConfig::GLOBAL.to_string(), pooled(&domains)));
    }
    let mut tables = Vec::new();
    let mut docs = Vec::new();
    for (name, aggs) in &sets {
        let ctx = || format!("domain `{name}`");
        let mut table = strategy_table(aggs, &opts).context(ctx)?;
        table.domain = name.clone();
        let mut doc = WeightsDoc::new(
            table.optimized_weights(),
            opts.accuracy.as_str(),
            opts.grid.step,
            opts.grid.w_max,
            opts.seed,
        );
        if let Some(fraction) = a.holdout {
            let fit = optimize_weights_holdout(aggs, fraction, &opts).context(ctx)?;
            doc = WeightsDoc::new(&fit.weights, opts.accuracy.as_str(), opts.grid.step, opts.grid.w_max, opts.seed);
            doc.holdout = Some(HoldoutSection {
                fraction,
                train_cases: fit.train_cases,
                holdout_cases: fit.holdout_cases,
                train_r: fit.train_r,
                holdout_r: fit.holdout_r,
            });
        }
        doc.domain = name.clone();
        tables.push(table);
        docs.push(doc);
    }
    let manifest_name = run.manifest_name.clone();
    run.write("strategies.tsv", &report::strategy_report(&tables, &manifest_name))?;
    // the last set is the pooled fit when there are several domains
    run.write("weights.toml", &docs.last().expect("at least one domain").to_toml())?;
    if domains.len() >= 2 {
        for doc in &docs[..docs.len() - 1] {
            run.write(&format!("weights-{}.toml", doc.domain), &doc.to_toml())?;
        }
    }
    run.finish()
}

fn transfer(a: &TransferArgs, replayed_from: Option<&Path>) -> Result<()> {
    let opts = FitOptions {
        grid: grid(&a.grid)?,
        accuracy: accuracy_mode(&a.input)?,
        m_tests: 1,
        seed: a.common.seed,
    };
    let mut run = Run::new("transfer", &a.common, a, replayed_from)?;
    run.inputs(&a.input);
    let domains = load_inputs(&a.input)?.aggregate()?;
    let matrix = transfer_matrix(&domains, &opts).context(|| "transfer".into())?;
    let manifest_name = run.manifest_name.clone();
    run.write("transfer.tsv", &report::transfer_report(&matrix, &manifest_name))?;
    run.finish()
}

fn triple(values: &[f64], flag: &str) -> Result<TierTriple<f64>> {
    match values {
        &[h, m, l] => Ok(TierTriple::new(h, m, l)),
        _ => Err(Error::Usage(format!("{flag} takes exactly three comma-separated values"))),
    }
}

fn triage(a: &TriageArgs, replayed_from: Option<&Path>) -> Result<()> {
    let verification = triple(&a.verification, "--verification")?;
    let error_cost = triple(&a.error_cost, "--error-cost")?;
    let params = CostParams::new(a.unit_cost, error_cost, verification).context(|| "cost parameters".into())?;
    let search = ThresholdSearch {
        grid_step: a.quantile_step,
        min_tier_coverage: a.min_coverage,
        include_terciles: !a.no_terciles,
    };
    match search.candidates() {
        Err(e) if !e.is_infeasible() => {
            return Err(Error::Usage(format!("--quantile-step/--min-coverage: {e}")))
        }
        _ => {}
    }
    let weights = resolve_weights(&a.weights)?;
    let seed = a.common.seed;

    let mut run = Run::new("triage", &a.common, a, replayed_from)?;
    run.inputs(&a.input);
    run.manifest.weights = Some(match &a.weights.weights {
        Some(p) => p.display().to_string(),
        None => format!("w1={} w2={}", weights.w1(), weights.w2()),
    });
    run.manifest.cost = Some(CostSection {
        unit_cost: a.unit_cost,
        verification_rate: [verification.high, verification.medium, verification.low],
        error_cost: [error_cost.high, error_cost.medium, error_cost.low],
    });

    let set = load_inputs(&a.input)?;
    let available = set.domains();
    let domain = match (&a.domain, available.as_slice()) {
        (Some(d), _) if available.contains(d) => d.clone(),
        (Some(d), _) => return Err(Error::Usage(format!("--domain `{d}` not found in the inputs"))),
        (None, [only]) => only.clone(),
        (None, _) => {
            return Err(Error::Usage(format!(
                "inputs hold several domains ({}); choose one with --domain",
                available.join(", ")
            )))
        }
    };
    let universe = set.universe(&domain).expect("loaded domains have universes").clone();
    let aggs = dualsig_core::signal::aggregate_cases(&set.domain_records(&domain), &universe)
        .context(|| format!("domain `{domain}`"))?;
    let ctx = || format!("domain `{domain}`");
    let scored = quality_scores(&aggs, &weights).context(ctx)?;
    let plan = optimize_thresholds(&scored, &aggs, &universe, &params, &search, seed).context(ctx)?;
    let assignment = assign_tiers(&scored, plan.theta_high, plan.theta_low).context(ctx)?;
    let samples = stratified_sample(&assignment, &params, seed);
    let sizes = [samples.high.len(), samples.medium.len(), samples.low.len()];

    let doc = PlanDoc::new(
        &domain,
        &plan,
        &weights,
        sizes,
        PlanContext {
            seed,
            min_tier_coverage: a.min_coverage,
            quantile_step: a.quantile_step,
        },
    );
    let manifest_name = run.manifest_name.clone();
    run.write("plan.toml", &doc.to_toml())?;
    let rows = [report::TriageRows {
        domain: &domain,
        plan: &plan,
        sample_sizes: sizes,
    }];
    run.write("triage.tsv", &report::triage_report(&rows, &manifest_name))?;
    run.write("samples.tsv", &report::sample_table(&domain, &samples, &manifest_name))?;
    run.finish()
}

