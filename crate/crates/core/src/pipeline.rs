//! End-to-end audit of a model grid across a source and a target dataset:
//! per-model audits, attribute probes, gap decompositions, Pareto transfer,
//! performance/fairness transfer correlations and criterion selection.

use crate::datamodel::{build_frame, EmbeddingRecord, EvaluationFrame, GroupPair, ModelMeta, PredictionRecord, Split};
use crate::error::{Error, Result};
use crate::fairness::{ParetoPoint, PolarityMode, TaskPolarity};
use crate::grid::{audit_frame, keys, AuditSpec, ModelAudit, ModelSummary};
use crate::metrics::{ThresholdPolicy, DEFAULT_ECE_BINS};
use crate::probe::{evaluate_probe, fit_probe, LabeledEmbeddings, ProbeOptions, ProbeReport};
use crate::report::{
    fmt_f64, gaps_table, metrics_table, pareto_table, selection_table, transfer_table, ReportEnvelope, Table,
};
use crate::select::{benchmark, default_criteria, BenchmarkMode, BenchmarkOptions, CriterionBenchmark, CutoffMode, SelectionCriterion, Setting};
use crate::shift::{
    decompose_gap, pareto_transfer, transfer_correlation, FrameDecomposition, ParetoTransfer, ThresholdMode,
    TransferCoordinates, TransferPoint, TransferReport,
};
use crate::stats::DEFAULT_ITERATIONS;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub setting: String,
    pub attribute: String,
    pub pair: GroupPair,
    /// Overrides the registry task when set.
    pub task: Option<String>,
    pub polarity: PolarityMode,
    pub policy: ThresholdPolicy,
    /// Carry the source threshold over to the target frame.
    pub freeze_threshold: bool,
    pub ece_bins: usize,
    pub split: Split,
    pub cutoff: Option<CutoffMode>,
    pub criteria: Vec<SelectionCriterion>,
    pub probe: ProbeOptions,
    pub min_id_auroc: Option<f64>,
    pub n_iter: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(setting: &str, attribute: &str, pair: GroupPair) -> Self {
        Self {
            setting: setting.into(),
            attribute: attribute.into(),
            pair,
            task: None,
            polarity: PolarityMode::Underdiagnosis,
            policy: ThresholdPolicy::F1Max,
            freeze_threshold: false,
            ece_bins: DEFAULT_ECE_BINS,
            split: Split::Test,
            cutoff: Some(CutoffMode::default()),
            criteria: default_criteria(),
            probe: ProbeOptions::default(),
            min_id_auroc: None,
            n_iter: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }

    fn threshold_mode(&self) -> ThresholdMode {
        if self.freeze_threshold {
            ThresholdMode::FrozenSource(self.policy)
        } else {
            ThresholdMode::PerFrame(self.policy)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub source: &'a [PredictionRecord],
    pub target: &'a [PredictionRecord],
    /// Source-domain embeddings; models without any are not probed.
    pub embeddings: &'a [EmbeddingRecord],
    pub registry: &'a [ModelMeta],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model_id: String,
    pub algorithm: String,
    pub task: String,
    pub id: ModelAudit,
    pub ood: ModelAudit,
    pub decomposition: FrameDecomposition,
    pub probe: Option<ProbeReport>,
    /// ID summary with probe metrics merged in; the selection grid.
    pub summary: ModelSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub source_dataset: String,
    pub target_dataset: String,
    pub models: Vec<ModelReport>,
    pub transfer: TransferReport,
    pub pareto: ParetoTransfer<f64>,
    pub selection: CriterionBenchmark,
    pub warnings: Vec<String>,
}

fn single_dataset(records: &[PredictionRecord], role: &str) -> Result<String> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    match ids.len() {
        1 => Ok(ids.into_iter().next().unwrap_or_default().to_string()),
        0 => Err(Error::InvalidConfig(format!("{role} predictions are empty"))),
        _ => Err(Error::InvalidConfig(format!(
            "{role} predictions span several datasets: {}",
            ids.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn by_model(records: &[PredictionRecord]) -> HashMap<&str, Vec<PredictionRecord>> {
    let mut out: HashMap<&str, Vec<PredictionRecord>> = HashMap::new();
    for r in records {
        out.entry(r.model_id.as_str()).or_default().push(r.clone());
    }
    out
}

/// Joins a model's embeddings with its source predictions to get split and
/// attribute per sample; samples without the attribute are skipped.
fn probe_splits(
    embeddings: &[&EmbeddingRecord],
    predictions: &[PredictionRecord],
    attribute: &str,
) -> Result<[LabeledEmbeddings<f64>; 3]> {
    let lookup: HashMap<&str, &PredictionRecord> = predictions.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let mut rows: [Vec<Vec<f64>>; 3] = Default::default();
    let mut labels: [Vec<String>; 3] = Default::default();
    for e in embeddings {
        let Some(rec) = lookup.get(e.sample_id.as_str()) else { continue };
        let Some(value) = rec.attribute(attribute) else { continue };
        let k = rec.split as usize;
        rows[k].push(e.vector.clone());
        labels[k].push(value.to_string());
    }
    let [tr, va, te] = rows;
    let [ltr, lva, lte] = labels;
    Ok([
        LabeledEmbeddings::new(&tr, ltr)?,
        LabeledEmbeddings::new(&va, lva)?,
        LabeledEmbeddings::new(&te, lte)?,
    ])
}

fn run_probe(
    embeddings: &[&EmbeddingRecord],
    predictions: &[PredictionRecord],
    attribute: &str,
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    let [train, val, test] = probe_splits(embeddings, predictions, attribute)?;
    let fit = fit_probe(&train, &val, opts)?;
    evaluate_probe(&fit.model, &test)
}

struct ModelWork<'a> {
    meta: &'a ModelMeta,
    source: Vec<PredictionRecord>,
    target: Vec<PredictionRecord>,
    embeddings: Vec<&'a EmbeddingRecord>,
}

fn frame(records: &[PredictionRecord], meta: &ModelMeta, dataset: &str, cfg: &PipelineConfig) -> Result<EvaluationFrame> {
    Ok(build_frame(records, &meta.model_id, dataset, cfg.split, &cfg.attribute)?.frame)
}

fn audit_model(work: &ModelWork, src_ds: &str, tar_ds: &str, cfg: &PipelineConfig) -> Result<ModelReport> {
    let meta = work.meta;
    let task = cfg.task.clone().unwrap_or_else(|| meta.task.clone());
    let polarity = TaskPolarity::new(task.clone(), cfg.polarity);
    let spec = AuditSpec {
        pair: cfg.pair.clone(),
        polarity: polarity.clone(),
        policy: cfg.policy,
        ece_bins: cfg.ece_bins,
    };
    let id_frame = frame(&work.source, meta, src_ds, cfg)?;
    let ood_frame = frame(&work.target, meta, tar_ds, cfg)?;
    let id = audit_frame(&id_frame, &spec, Some(meta))?;
    let mut ood_spec = spec.clone();
    if cfg.freeze_threshold {
        ood_spec.policy = ThresholdPolicy::Fixed(id.metrics.threshold);
    }
    let ood = audit_frame(&ood_frame, &ood_spec, Some(meta))?;
    let decomposition = decompose_gap(&id_frame, &ood_frame, polarity.metric(), &cfg.pair, cfg.threshold_mode())?;
    let probe = if work.embeddings.is_empty() {
        None
    } else {
        Some(run_probe(&work.embeddings, &work.source, &cfg.attribute, &cfg.probe)?)
    };
    let mut summary = id.summary.clone();
    if let Some(p) = &probe {
        summary.set(keys::PROBE_AUROC, p.macro_auroc_test);
        summary.set(keys::PROBE_ACCURACY, p.argmax_accuracy_test);
    }
    Ok(ModelReport {
        model_id: meta.model_id.clone(),
        algorithm: meta.algorithm.clone(),
        task,
        id,
        ood,
        decomposition,
        probe,
        summary,
    })
}

pub fn run_pipeline(inputs: PipelineInputs, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let src_ds = single_dataset(inputs.source, "source")?;
    let tar_ds = single_dataset(inputs.target, "target")?;
    let mut src = by_model(inputs.source);
    let mut tar = by_model(inputs.target);
    let mut emb: HashMap<&str, Vec<&EmbeddingRecord>> = HashMap::new();
    for e in inputs.embeddings {
        emb.entry(e.model_id.as_str()).or_default().push(e);
    }

    let mut registry: Vec<&ModelMeta> = inputs.registry.iter().collect();
    registry.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let mut warnings = Vec::new();
    let mut work = Vec::new();
    for meta in registry {
        match (src.remove(meta.model_id.as_str()), tar.remove(meta.model_id.as_str())) {
            (Some(source), Some(target)) => work.push(ModelWork {
                meta,
                source,
                target,
                embeddings: emb.remove(meta.model_id.as_str()).unwrap_or_default(),
            }),
            _ => warnings.push(format!("model {} lacks source or target predictions; skipped", meta.model_id)),
        }
    }
    let mut orphans: Vec<&str> = src.keys().chain(tar.keys()).copied().collect();
    orphans.sort_unstable();
    orphans.dedup();
    for id in orphans {
        warnings.push(format!("model {id} is not in the registry; skipped"));
    }

    let models: Vec<ModelReport> = work
        .par_iter()
        .map(|w| audit_model(w, &src_ds, &tar_ds, cfg))
        .collect::<Result<_>>()?;
    for m in &models {
        for w in m.id.metrics.warnings.iter().chain(&m.ood.metrics.warnings) {
            warnings.push(format!("{}: {w}", m.model_id));
        }
        if m.probe.as_ref().is_some_and(|p| !p.converged) {
            warnings.push(format!("{}: probe did not converge", m.model_id));
        }
    }

    let point = |m: &ModelReport, audit: &ModelAudit| -> Result<TransferPoint> {
        Ok(TransferPoint {
            model_id: m.model_id.clone(),
            auroc: audit.summary.require(keys::AUROC)?,
            abs_gap: audit.summary.require(keys::GAP)?,
        })
    };
    let src_points: Vec<TransferPoint> = models.iter().map(|m| point(m, &m.id)).collect::<Result<_>>()?;
    let tar_points: Vec<TransferPoint> = models.iter().map(|m| point(m, &m.ood)).collect::<Result<_>>()?;
    let transfer = transfer_correlation(&src_points, &tar_points, cfg.min_id_auroc)?;
    let coords: Vec<TransferCoordinates<f64>> = src_points
        .iter()
        .zip(&tar_points)
        .map(|(s, t)| TransferCoordinates {
            model_id: s.model_id.clone(),
            id_performance: s.auroc,
            id_gap: s.abs_gap,
            ood_performance: t.auroc,
            ood_gap: t.abs_gap,
        })
        .collect();
    let pareto = pareto_transfer(&coords)?;

    let setting = Setting {
        name: cfg.setting.clone(),
        grid: models.iter().map(|m| m.summary.clone()).collect(),
        ood_gaps: tar_points.iter().map(|p| (p.model_id.clone(), p.abs_gap)).collect(),
    };
    let selection = benchmark(
        &[setting],
        &BenchmarkMode::Criteria(cfg.criteria.clone()),
        &BenchmarkOptions {
            cutoff: cfg.cutoff,
            n_iter: cfg.n_iter,
            seed: cfg.seed,
            pairwise: true,
        },
    )?;

    Ok(PipelineReport {
        source_dataset: src_ds,
        target_dataset: tar_ds,
        models,
        transfer,
        pareto,
        selection,
        warnings,
    })
}

impl PipelineReport {
    pub fn model(&self, model_id: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    /// Selected model and its OOD gap for one criterion (single setting).
    pub fn selected(&self, criterion: &str) -> Option<(&str, f64)> {
        self.selection
            .rows
            .iter()
            .find(|r| r.entry == criterion)
            .map(|r| (r.selected_model.as_str(), r.ood_gap))
    }

    pub fn envelope<C: Serialize>(&self, command: &str, config: &C) -> Result<ReportEnvelope> {
        Ok(ReportEnvelope::new(command, config, self)?.with_sections(&["warnings"]))
    }

    pub fn tables(&self) -> Vec<Table> {
        let id_sets: Vec<_> = self.models.iter().map(|m| m.id.metrics.clone()).collect();
        let ood_sets: Vec<_> = self.models.iter().map(|m| m.ood.metrics.clone()).collect();
        let mut metrics_ood = metrics_table(&ood_sets);
        metrics_ood.name = "metrics_ood.csv".into();
        let mut gaps_ood = gaps_table(self.models.iter().flat_map(|m| m.ood.gaps.iter().map(|g| (m.model_id.as_str(), g))));
        gaps_ood.name = "gaps_ood.csv".into();

        let mut waterfall = Table::new("waterfall.csv", &["model_id", "term", "value"]);
        for m in &self.models {
            for (term, v) in m.decomposition.decomposition.terms() {
                waterfall.push(vec![m.model_id.clone(), term.into(), fmt_f64(v)]);
            }
        }

        let mut probes = Table::new("probe.csv", &["model_id", "class", "auroc"]);
        for m in &self.models {
            for c in m.probe.iter().flat_map(|p| &p.per_class_auroc) {
                probes.push(vec![m.model_id.clone(), c.class.clone(), fmt_f64(c.auroc)]);
            }
        }

        let (id_points, ood_points): (Vec<_>, Vec<_>) = self
            .models
            .iter()
            .map(|m| {
                let s = |a: &ModelAudit, k| a.summary.get(k).unwrap_or(f64::NAN);
                (
                    ParetoPoint::new(&m.model_id, s(&m.id, keys::AUROC), s(&m.id, keys::GAP)),
                    ParetoPoint::new(&m.model_id, s(&m.ood, keys::AUROC), s(&m.ood, keys::GAP)),
                )
            })
            .unzip();

        let mut summary = Table::new(
            "selection_summary.csv",
            &["criterion", "n_settings", "mean_increase", "ci_low", "ci_high", "definition"],
        );
        for s in &self.selection.summaries {
            summary.push(vec![
                s.entry.clone(),
                s.n_settings.to_string(),
                fmt_f64(s.mean_increase),
                fmt_f64(s.ci95.0),
                fmt_f64(s.ci95.1),
                s.definition.clone(),
            ]);
        }

        vec![
            metrics_table(&id_sets),
            metrics_ood,
            gaps_table(self.models.iter().flat_map(|m| m.id.gaps.iter().map(|g| (m.model_id.as_str(), g)))),
            gaps_ood,
            waterfall,
            probes,
            pareto_table("pareto_id.csv", &id_points, &self.pareto.front_id),
            pareto_table("pareto_ood.csv", &ood_points, &self.pareto.front_ood),
            transfer_table([(self.selection.settings[0].as_str(), &self.transfer)]),
            selection_table(&self.selection),
            summary,
        ]
    }

    /// Per-model probe reports keyed by model id, as written to `probe.json`.
    pub fn probe_json(&self) -> BTreeMap<&str, Option<&ProbeReport>> {
        self.models.iter().map(|m| (m.model_id.as_str(), m.probe.as_ref())).collect()
    }

    pub fn decomposition_json(&self) -> BTreeMap<&str, &FrameDecomposition> {
        self.models.iter().map(|m| (m.model_id.as_str(), &m.decomposition)).collect()
    }
}
