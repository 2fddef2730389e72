//! Command-line surface. Every subcommand writes `report.json` (config echo,
//! tool version, payload) plus plot-ready CSV tables into `--out`.

use crate::datamodel::{
    build_frame, load_embeddings, load_predictions, load_registry, FileFormat, GroupPair, ModelMeta, PredictionRecord,
    Split,
};
use crate::error::{Error, Result};
use crate::fairness::{pareto_front, ParetoPoint, PolarityMode, TaskPolarity, NO_FINDING};
use crate::grid::{audit_frame, keys, AuditSpec, ModelAudit};
use crate::metrics::{RateMetric, ThresholdPolicy, DEFAULT_ECE_BINS};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineInputs};
use crate::probe::{default_l2_grid, evaluate_probe, fit_probe, LabeledEmbeddings, ProbeOptions, ProbeReport};
use crate::report::{
    fmt_f64, gaps_table, metrics_table, pareto_table, selection_table, transfer_table, waterfall_table,
    write_json_file, write_report, ReportEnvelope, Table,
};
use crate::select::{
    benchmark, default_criteria, BenchmarkMode, BenchmarkOptions, CutoffMode, SelectionCriterion, Setting,
};
use crate::shift::{decompose_gap, transfer_correlation, GapDecomposition, ThresholdMode, TransferPoint};
use crate::stats::DEFAULT_ITERATIONS;
use crate::synth::{generate_benchmark, write_bundle, SynthConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about = "Fairness under distribution shift audits")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "FAIRAUDIT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-group metrics and fairness gaps for every model in a predictions file.
    Audit(AuditArgs),
    /// Attribute-encoding probes on frozen embeddings.
    Probe(ProbeArgs),
    /// Decompose the OOD fairness gap into ID gap and per-group shift impacts.
    Decompose(DecomposeArgs),
    /// Pareto front of performance against absolute fairness gap.
    Pareto(ParetoArgs),
    /// ID vs OOD correlation of performance and fairness across models.
    Correlate(CorrelateArgs),
    /// Benchmark selection criteria against the OOD oracle.
    Select(SelectArgs),
    /// Write a synthetic shortcut-shift bundle.
    Synth(SynthArgs),
    /// Full pipeline over a source and a target dataset.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Underdiagnosis,
    Overdiagnosis,
}

impl From<Polarity> for PolarityMode {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Underdiagnosis => PolarityMode::Underdiagnosis,
            Polarity::Overdiagnosis => PolarityMode::Overdiagnosis,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GroupArgs {
    #[arg(long)]
    pub attribute: String,
    /// Ordered pair `g1,g2`; gaps are g1 minus g2.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
    pub groups: Vec<String>,
    /// Task name; defaults to the registry entry, else "No Finding".
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, value_enum, default_value = "underdiagnosis")]
    pub polarity: Polarity,
    /// `f1` for the F1-maximizing threshold, or a fixed value in [0, 1].
    #[arg(long, default_value = "f1")]
    pub threshold: String,
    #[arg(long, default_value_t = DEFAULT_ECE_BINS)]
    pub ece_bins: usize,
    #[arg(long, default_value = "test")]
    pub split: String,
}

impl GroupArgs {
    fn pair(&self) -> Result<GroupPair> {
        match self.groups.as_slice() {
            [a, b] => GroupPair::new(a.trim(), b.trim()),
            _ => Err(Error::InvalidConfig(format!(
                "--groups needs exactly two groups, got {}",
                self.groups.len()
            ))),
        }
    }

    fn policy(&self) -> Result<ThresholdPolicy> {
        self.threshold.parse()
    }

    fn split(&self) -> Result<Split> {
        parse_split(&self.split)
    }

    fn task_for(&self, meta: Option<&ModelMeta>) -> String {
        self.task
            .clone()
            .or_else(|| meta.map(|m| m.task.clone()))
            .unwrap_or_else(|| NO_FINDING.to_string())
    }

    fn spec(&self, meta: Option<&ModelMeta>) -> Result<AuditSpec> {
        if self.ece_bins == 0 {
            return Err(Error::InvalidConfig("--ece-bins must be positive".into()));
        }
        Ok(AuditSpec {
            pair: self.pair()?,
            polarity: TaskPolarity::new(self.task_for(meta), self.polarity.into()),
            policy: self.policy()?,
            ece_bins: self.ece_bins,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AuditArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[command(flatten)]
    pub groups: GroupArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Predictions supplying split and attribute per sample.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub attribute: String,
    /// Probe only this model.
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated L2 strengths; defaults to 1e-5..10.
    #[arg(long, value_delimiter = ',')]
    pub l2_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    /// Source-domain predictions.
    #[arg(long, required_unless_present = "id_gap")]
    pub source: Option<PathBuf>,
    /// Target-domain predictions.
    #[arg(long, required_unless_present = "id_gap")]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub attribute: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, value_enum, default_value = "underdiagnosis")]
    pub polarity: Polarity,
    /// Explicit rate (accuracy, tpr, tnr, fpr, fnr) instead of the task polarity.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value = "f1")]
    pub threshold: String,
    /// Reuse the source threshold on the target frame.
    #[arg(long)]
    pub freeze_threshold: bool,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub model: Option<String>,
    /// Rebuild from published terms instead of frames.
    #[arg(long, allow_hyphen_values = true, requires_all = ["change_g1", "change_g2"])]
    pub id_gap: Option<f64>,
    /// Target minus source rate change of g1.
    #[arg(long, allow_hyphen_values = true)]
    pub change_g1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub change_g2: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerformanceAxis {
    Overall,
    WorstGroup,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParetoArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[command(flatten)]
    pub groups: GroupArgs,
    #[arg(long, value_enum, default_value = "overall")]
    pub performance: PerformanceAxis,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[command(flatten)]
    pub groups: GroupArgs,
    /// Drop models whose ID AUROC falls below this value.
    #[arg(long)]
    pub min_id_auroc: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffKind {
    Relative,
    Absolute,
    None,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CutoffArgs {
    #[arg(long, value_enum, default_value = "relative")]
    pub cutoff: CutoffKind,
    /// Fraction of the ERM baseline (relative) or points below it (absolute).
    #[arg(long, default_value_t = 0.95)]
    pub cutoff_value: f64,
}

impl CutoffArgs {
    fn mode(&self) -> Result<Option<CutoffMode>> {
        if !self.cutoff_value.is_finite() || self.cutoff_value < 0.0 {
            return Err(Error::InvalidConfig("--cutoff-value must be finite and non-negative".into()));
        }
        Ok(match self.cutoff {
            CutoffKind::Relative => Some(CutoffMode::RelativeFraction(self.cutoff_value)),
            CutoffKind::Absolute => Some(CutoffMode::AbsolutePoints(self.cutoff_value)),
            CutoffKind::None => None,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    /// JSON list of settings: `{name, grid: [{model_id, algorithm, metrics}], ood_gaps}`.
    #[arg(long)]
    pub settings: PathBuf,
    /// JSON list of criteria replacing the default eight.
    #[arg(long)]
    pub criteria: Option<PathBuf>,
    /// Compare algorithms (best model per tag by this metric) instead of criteria.
    #[arg(long)]
    pub by_algorithm: Option<String>,
    #[command(flatten)]
    pub cutoff: CutoffArgs,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub bootstrap_iters: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// JSON config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Source-domain embeddings for the attribute probes.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub registry: PathBuf,
    #[command(flatten)]
    pub groups: GroupArgs,
    #[arg(long)]
    pub freeze_threshold: bool,
    #[command(flatten)]
    pub cutoff: CutoffArgs,
    #[arg(long)]
    pub criteria: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub l2_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub min_id_auroc: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub bootstrap_iters: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "default")]
    pub setting: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_split(s: &str) -> Result<Split> {
    s.parse()
        .map_err(|()| Error::InvalidConfig(format!("unknown split `{s}`; expected train, val or test")))
}

fn predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    load_predictions(path, FileFormat::from_path(path))
}

fn registry_map(path: Option<&Path>) -> Result<BTreeMap<String, ModelMeta>> {
    let Some(p) = path else { return Ok(BTreeMap::new()) };
    Ok(load_registry(p)?.into_iter().map(|m| (m.model_id.clone(), m)).collect())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

fn probe_options(grid: &Option<Vec<f64>>, no_standardize: bool) -> Result<ProbeOptions> {
    let l2_grid = grid.clone().unwrap_or_else(default_l2_grid);
    if l2_grid.is_empty() || l2_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidConfig("--l2-grid needs finite non-negative values".into()));
    }
    Ok(ProbeOptions {
        l2_grid,
        standardize: !no_standardize,
        ..ProbeOptions::default()
    })
}

/// Sorted (model, dataset) combinations present in `records`.
fn combinations(records: &[PredictionRecord]) -> BTreeSet<(String, String)> {
    records
        .iter()
        .map(|r| (r.model_id.clone(), r.dataset_id.clone()))
        .collect()
}

fn audit_all(
    records: &[PredictionRecord],
    registry: &BTreeMap<String, ModelMeta>,
    args: &GroupArgs,
) -> Result<Vec<ModelAudit>> {
    let split = args.split()?;
    combinations(records)
        .into_iter()
        .map(|(model, dataset)| {
            let frame = build_frame(records, &model, &dataset, split, &args.attribute)?.frame;
            let meta = registry.get(&model);
            audit_frame(&frame, &args.spec(meta)?, meta)
        })
        .collect()
}

fn finish<C: Serialize, P: Serialize>(
    out: &Path,
    command: &str,
    config: &C,
    payload: &P,
    sections: &[&str],
    tables: &[Table],
) -> Result<()> {
    let env = ReportEnvelope::new(command, config, payload)?.with_sections(sections);
    write_report(out, &env, tables).map(|_| ())
}

fn cmd_audit(a: &AuditArgs) -> Result<()> {
    let records = predictions(&a.predictions)?;
    let registry = registry_map(a.registry.as_deref())?;
    let audits = audit_all(&records, &registry, &a.groups)?;
    let sets: Vec<_> = audits.iter().map(|m| m.metrics.clone()).collect();
    let gaps = gaps_table(audits.iter().flat_map(|m| m.gaps.iter().map(|g| (m.metrics.model_id.as_str(), g))));
    #[derive(Serialize)]
    struct Payload<'a> {
        audits: &'a [ModelAudit],
        warnings: Vec<String>,
    }
    let warnings = audits
        .iter()
        .flat_map(|m| m.metrics.warnings.iter().map(|w| format!("{}: {w}", m.metrics.model_id)))
        .collect();
    let payload = Payload {
        audits: &audits,
        warnings,
    };
    finish(&a.out, "audit", a, &payload, &["audits", "warnings"], &[metrics_table(&sets), gaps])
}

fn probe_one(
    model: &str,
    emb: &[crate::datamodel::EmbeddingRecord],
    preds: &[PredictionRecord],
    attribute: &str,
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    let lookup: BTreeMap<&str, &PredictionRecord> = preds
        .iter()
        .filter(|r| r.model_id == model)
        .map(|r| (r.sample_id.as_str(), r))
        .collect();
    let mut parts: BTreeMap<Split, (Vec<Vec<f64>>, Vec<String>)> = BTreeMap::new();
    for e in emb.iter().filter(|e| e.model_id == model) {
        let Some(rec) = lookup.get(e.sample_id.as_str()) else { continue };
        let Some(v) = rec.attribute(attribute) else { continue };
        let slot = parts.entry(rec.split).or_default();
        slot.0.push(e.vector.clone());
        slot.1.push(v.to_string());
    }
    let mut take = |s: Split| -> Result<LabeledEmbeddings<f64>> {
        let (rows, labels) = parts.remove(&s).unwrap_or_default();
        if rows.is_empty() {
            return Err(Error::InvalidConfig(format!("model {model} has no labeled {s} embeddings")));
        }
        LabeledEmbeddings::new(&rows, labels)
    };
    let (train, val, test) = (take(Split::Train)?, take(Split::Val)?, take(Split::Test)?);
    let fit = fit_probe(&train, &val, opts)?;
    evaluate_probe(&fit.model, &test)
}

fn cmd_probe(a: &ProbeArgs) -> Result<()> {
    let emb = load_embeddings(&a.embeddings, FileFormat::from_path(&a.embeddings))?;
    let preds = predictions(&a.predictions)?;
    let opts = probe_options(&a.l2_grid, a.no_standardize)?;
    let models: BTreeSet<&str> = emb
        .iter()
        .map(|e| e.model_id.as_str())
        .filter(|m| a.model.as_deref().is_none_or(|want| want == *m))
        .collect();
    if models.is_empty() {
        return Err(Error::InvalidConfig("no embeddings match the requested model".into()));
    }
    let mut reports = BTreeMap::new();
    let mut table = Table::new("probe.csv", &["model_id", "class", "auroc"]);
    for m in models {
        let r = probe_one(m, &emb, &preds, &a.attribute, &opts)?;
        for c in &r.per_class_auroc {
            table.push(vec![m.to_string(), c.class.clone(), fmt_f64(c.auroc)]);
        }
        reports.insert(m.to_string(), r);
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_json_file(&a.out.join("probe.json"), &reports)?;
    finish(&a.out, "probe", a, &reports, &[], &[table])
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    let metric = a.metric.as_deref().map(str::parse::<RateMetric>).transpose()?;
    let pair = || match a.groups.as_slice() {
        [g1, g2] => GroupPair::new(g1.trim(), g2.trim()),
        _ => Err(Error::InvalidConfig("--groups needs exactly two groups".into())),
    };
    if let (Some(id_gap), Some(c1), Some(c2)) = (a.id_gap, a.change_g1, a.change_g2) {
        let pair = if a.groups.is_empty() { GroupPair::new("g1", "g2")? } else { pair()? };
        let d = GapDecomposition::from_changes(metric.unwrap_or(RateMetric::Fpr), pair, id_gap, c1, c2);
        std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
        write_json_file(&a.out.join("decomposition.json"), &d)?;
        return finish(&a.out, "decompose", a, &d, &[], &[waterfall_table(&d)]);
    }
    let (Some(src_path), Some(tar_path)) = (&a.source, &a.target) else {
        return Err(Error::InvalidConfig("--source and --target are required".into()));
    };
    let attribute = a
        .attribute
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("--attribute is required".into()))?;
    let pair = pair()?;
    let split = parse_split(&a.split)?;
    let policy: ThresholdPolicy = a.threshold.parse()?;
    let src = predictions(src_path)?;
    let tar = predictions(tar_path)?;
    let pick = |records: &[PredictionRecord], role: &str| -> Result<(String, String)> {
        let combos: Vec<(String, String)> = combinations(records)
            .into_iter()
            .filter(|(m, _)| a.model.as_deref().is_none_or(|want| want == m))
            .collect();
        match combos.as_slice() {
            [one] => Ok(one.clone()),
            [] => Err(Error::InvalidConfig(format!("{role} file has no matching model"))),
            _ => Err(Error::InvalidConfig(format!(
                "{role} file holds several model/dataset combinations; pass --model"
            ))),
        }
    };
    let (model, src_ds) = pick(&src, "source")?;
    let (_, tar_ds) = pick(&tar, "target")?;
    let src_frame = build_frame(&src, &model, &src_ds, split, attribute)?.frame;
    let tar_frame = build_frame(&tar, &model, &tar_ds, split, attribute)?.frame;
    let metric = metric.unwrap_or_else(|| {
        TaskPolarity::new(a.task.clone().unwrap_or_else(|| NO_FINDING.into()), a.polarity.into()).metric()
    });
    let mode = if a.freeze_threshold {
        ThresholdMode::FrozenSource(policy)
    } else {
        ThresholdMode::PerFrame(policy)
    };
    let fd = decompose_gap(&src_frame, &tar_frame, metric, &pair, mode)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_json_file(&a.out.join("decomposition.json"), &fd)?;
    finish(&a.out, "decompose", a, &fd, &[], &[waterfall_table(&fd.decomposition)])
}

fn cmd_pareto(a: &ParetoArgs) -> Result<()> {
    let records = predictions(&a.predictions)?;
    let registry = registry_map(a.registry.as_deref())?;
    let audits = audit_all(&records, &registry, &a.groups)?;
    let key = match a.performance {
        PerformanceAxis::Overall => keys::AUROC,
        PerformanceAxis::WorstGroup => keys::WORST_GROUP_AUROC,
    };
    let points: Vec<ParetoPoint<f64>> = audits
        .iter()
        .map(|m| {
            Ok(ParetoPoint::new(
                format!("{}@{}", m.metrics.model_id, m.metrics.dataset_id),
                m.summary.require(key)?,
                m.summary.require(keys::GAP)?,
            ))
        })
        .collect::<Result<_>>()?;
    let front = pareto_front(&points)?;
    let table = pareto_table("pareto.csv", &points, &front);
    #[derive(Serialize)]
    struct Payload<'a> {
        points: &'a [ParetoPoint<f64>],
        front: &'a [ParetoPoint<f64>],
    }
    let payload = Payload {
        points: &points,
        front: &front.front,
    };
    finish(&a.out, "pareto", a, &payload, &["points", "front"], &[table])
}

fn cmd_correlate(a: &CorrelateArgs) -> Result<()> {
    let registry = registry_map(a.registry.as_deref())?;
    let grid = |path: &Path| -> Result<Vec<TransferPoint>> {
        let records = predictions(path)?;
        audit_all(&records, &registry, &a.groups)?
            .into_iter()
            .map(|m| {
                Ok(TransferPoint {
                    model_id: m.metrics.model_id.clone(),
                    auroc: m.summary.require(keys::AUROC)?,
                    abs_gap: m.summary.require(keys::GAP)?,
                })
            })
            .collect()
    };
    let (src, tar) = (grid(&a.source)?, grid(&a.target)?);
    let rep = transfer_correlation(&src, &tar, a.min_id_auroc)?;
    finish(&a.out, "correlate", a, &rep, &["models"], &[transfer_table([("default", &rep)])])
}

fn cmd_select(a: &SelectArgs) -> Result<()> {
    let settings: Vec<Setting> = read_json(&a.settings)?;
    let mode = match (&a.by_algorithm, &a.criteria) {
        (Some(metric), _) => BenchmarkMode::Algorithms { metric: metric.clone() },
        (None, Some(path)) => BenchmarkMode::Criteria(read_json::<Vec<SelectionCriterion>>(path)?),
        (None, None) => BenchmarkMode::Criteria(default_criteria()),
    };
    let opts = BenchmarkOptions {
        cutoff: a.cutoff.mode()?,
        n_iter: a.bootstrap_iters,
        seed: a.seed,
        pairwise: true,
    };
    let b = benchmark(&settings, &mode, &opts)?;
    finish(&a.out, "select", a, &b, &["rows", "summaries", "pairwise"], &[selection_table(&b)])
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    let bundle = generate_benchmark(&cfg)?;
    write_bundle(&bundle, &a.out)?;
    let mut table = Table::new("registry_summary.csv", &["model_id", "algorithm", "lambda", "val_auroc"]);
    for m in &bundle.registry {
        table.push(vec![
            m.model_id.clone(),
            m.algorithm.clone(),
            m.hparams.get("lambda").cloned().unwrap_or_default(),
            m.val_auroc.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    finish(&a.out, "synth", a, &bundle.registry, &[], &[table])
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let src = predictions(&a.source)?;
    let tar = predictions(&a.target)?;
    let emb = match &a.embeddings {
        Some(p) => load_embeddings(p, FileFormat::from_path(p))?,
        None => vec![],
    };
    let registry = load_registry(&a.registry)?;
    let mut cfg = PipelineConfig::new(&a.setting, &a.groups.attribute, a.groups.pair()?);
    cfg.task = a.groups.task.clone();
    cfg.polarity = a.groups.polarity.into();
    cfg.policy = a.groups.policy()?;
    cfg.freeze_threshold = a.freeze_threshold;
    cfg.ece_bins = a.groups.ece_bins;
    cfg.split = a.groups.split()?;
    cfg.cutoff = a.cutoff.mode()?;
    if let Some(p) = &a.criteria {
        cfg.criteria = read_json(p)?;
    }
    cfg.probe = probe_options(&a.l2_grid, a.no_standardize)?;
    cfg.min_id_auroc = a.min_id_auroc;
    cfg.n_iter = a.bootstrap_iters;
    cfg.seed = a.seed;
    let inputs = PipelineInputs {
        source: &src,
        target: &tar,
        embeddings: &emb,
        registry: &registry,
    };
    let rep = run_pipeline(inputs, &cfg)?;
    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a ReportArgs,
        pipeline: &'a PipelineConfig,
    }
    let config = Config { args: a, pipeline: &cfg };
    let env = rep.envelope("report", &config)?;
    write_report(&a.out, &env, &rep.tables())?;
    write_json_file(&a.out.join("probe.json"), &rep.probe_json())?;
    write_json_file(&a.out.join("decomposition.json"), &rep.decomposition_json())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Audit(a) => cmd_audit(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Pareto(a) => cmd_pareto(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Select(a) => cmd_select(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Runs `cli` on a pool of `--threads` workers.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_input_error() {
        2
    } else {
        3
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
