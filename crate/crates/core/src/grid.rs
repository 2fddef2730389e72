//! Per-model audit summaries: the common currency of the Pareto, transfer
//! and selection analyses.

use crate::datamodel::{EvaluationFrame, GroupPair, ModelMeta};
use crate::error::{Error, Result};
use crate::fairness::{group_metrics, metric_gap, rate_gap, FairnessGap, MetricSet, TaskPolarity};
use crate::metrics::{RateMetric, ThresholdPolicy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Metric names stored in [`ModelSummary::metrics`].
pub mod keys {
    /// Overall validation AUROC (registry value when available).
    pub const VAL_AUROC: &str = "val_auroc";
    pub const AUROC: &str = "auroc";
    pub const WORST_GROUP_AUROC: &str = "worst_group_auroc";
    /// Absolute gap in the task's polarity-resolved error rate.
    pub const GAP: &str = "gap";
    pub const SIGNED_GAP: &str = "signed_gap";
    pub const ECE: &str = "ece";
    pub const ECE_GAP: &str = "ece_gap";
    /// Largest per-group value of the polarity-resolved error rate.
    pub const WORST_GROUP_ERROR: &str = "worst_group_error";
    pub const AP: &str = "ap";
    pub const AP_GAP: &str = "ap_gap";
    pub const F1: &str = "f1";
    pub const F1_GAP: &str = "f1_gap";
    pub const FPR_GAP: &str = "fpr_gap";
    pub const FNR_GAP: &str = "fnr_gap";
    pub const PROBE_AUROC: &str = "probe_auroc";
    pub const PROBE_ACCURACY: &str = "probe_accuracy";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub algorithm: String,
    pub metrics: BTreeMap<String, f64>,
}

impl ModelSummary {
    pub fn new(model_id: impl Into<String>, algorithm: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            algorithm: algorithm.into(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied().filter(|v| v.is_finite())
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::MissingMetric {
            model_id: self.model_id.clone(),
            metric: key.to_string(),
        })
    }

    /// Validation AUROC, falling back to the AUROC of the audited frame.
    pub fn overall_auroc(&self) -> Option<f64> {
        self.get(keys::VAL_AUROC).or_else(|| self.get(keys::AUROC))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSpec {
    pub pair: GroupPair,
    pub polarity: TaskPolarity,
    pub policy: ThresholdPolicy,
    pub ece_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub metrics: MetricSet,
    /// Polarity metric first, then the complementary error rate, then ECE.
    pub gaps: Vec<FairnessGap>,
    pub summary: ModelSummary,
}

fn complement(metric: RateMetric) -> RateMetric {
    match metric {
        RateMetric::Fpr => RateMetric::Fnr,
        RateMetric::Fnr => RateMetric::Fpr,
        RateMetric::Tpr => RateMetric::Tnr,
        RateMetric::Tnr => RateMetric::Tpr,
        RateMetric::Accuracy => RateMetric::Accuracy,
    }
}

pub fn audit_frame(frame: &EvaluationFrame, spec: &AuditSpec, meta: Option<&ModelMeta>) -> Result<ModelAudit> {
    spec.pair.check(frame)?;
    let set = group_metrics(frame, spec.policy, spec.ece_bins)?;
    let metric = spec.polarity.metric();
    let primary = rate_gap(frame, &spec.pair, metric, set.threshold)?;
    let mut gaps = vec![primary.clone()];
    if let Ok(g) = rate_gap(frame, &spec.pair, complement(metric), set.threshold) {
        gaps.push(g);
    }
    let ece_gap = metric_gap(&set, &spec.pair, "ece")?;
    gaps.push(ece_gap.clone());

    let algorithm = meta.map(|m| m.algorithm.clone()).unwrap_or_default();
    let mut summary = ModelSummary::new(&frame.model_id, algorithm);
    if let Some(v) = meta.and_then(|m| m.val_auroc) {
        summary.set(keys::VAL_AUROC, v);
    }
    if let Some(a) = set.overall.auroc {
        summary.set(keys::AUROC, a);
    }
    if let Some(w) = set.worst_group_auroc() {
        summary.set(keys::WORST_GROUP_AUROC, w);
    }
    summary.set(keys::GAP, primary.abs_gap);
    summary.set(keys::SIGNED_GAP, primary.signed_gap);
    summary.set(keys::ECE, set.overall.ece);
    summary.set(keys::ECE_GAP, ece_gap.abs_gap);
    if let Some(worst) = set
        .groups
        .iter()
        .filter_map(|g| g.counts.rate(metric))
        .reduce(f64::max)
    {
        summary.set(keys::WORST_GROUP_ERROR, worst);
    }
    summary.set(keys::F1, set.overall.f1);
    if let Some(ap) = set.overall.average_precision {
        summary.set(keys::AP, ap);
    }
    if let Ok(g) = metric_gap(&set, &spec.pair, "f1") {
        summary.set(keys::F1_GAP, g.abs_gap);
    }
    if let Ok(g) = metric_gap(&set, &spec.pair, "ap") {
        summary.set(keys::AP_GAP, g.abs_gap);
    }
    for (m, key) in [(RateMetric::Fpr, keys::FPR_GAP), (RateMetric::Fnr, keys::FNR_GAP)] {
        if let Some(g) = gaps.iter().find(|g| g.metric == m.as_str()) {
            summary.set(key, g.abs_gap);
        }
    }
    Ok(ModelAudit {
        metrics: set,
        gaps,
        summary,
    })
}
