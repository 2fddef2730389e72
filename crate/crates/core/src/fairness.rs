//! Per-group evaluation, polarity-resolved fairness gaps, Pareto fronts and
//! trade-off correlations over model grids.

use crate::datamodel::{EvaluationFrame, GroupPair};
use crate::error::{Error, Result};
use crate::grid::ModelSummary;
use crate::metrics::{
    self, average_precision, rates_at_threshold, Conditioning, ConfusionCounts, RateMetric,
    ThresholdPolicy,
};
use crate::scalar::Scalar;
use crate::stats::{pearson, CorrelationResult};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub n: usize,
    /// `None` when the group lacks one of the classes.
    pub auroc: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub f1: f64,
    pub average_precision: Option<f64>,
    pub ece: f64,
    pub threshold: f64,
    pub counts: ConfusionCounts,
}

impl GroupMetrics {
    fn evaluate(group: &str, scores: &[f64], labels: &[u8], threshold: f64, ece_bins: usize) -> Result<Self> {
        let counts = rates_at_threshold(scores, labels, threshold);
        Ok(Self {
            group: group.to_string(),
            n: scores.len(),
            auroc: metrics::auroc(scores, labels).ok(),
            tpr: counts.tpr(),
            tnr: counts.tnr(),
            fpr: counts.fpr(),
            fnr: counts.fnr(),
            f1: counts.f1(),
            average_precision: average_precision(scores, labels).ok(),
            ece: metrics::ece(scores, labels, ece_bins)?,
            threshold,
            counts,
        })
    }

    /// Named scalar view used by gap and grid code.
    pub fn value(&self, name: &str) -> Option<f64> {
        match name {
            "auroc" => self.auroc,
            "tpr" => self.tpr,
            "tnr" => self.tnr,
            "fpr" => self.fpr,
            "fnr" => self.fnr,
            "accuracy" => self.counts.accuracy(),
            "f1" => Some(self.f1),
            "ap" | "average_precision" => self.average_precision,
            "ece" => Some(self.ece),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub model_id: String,
    pub dataset_id: String,
    /// Frame-level threshold shared by every group.
    pub threshold: f64,
    pub overall: GroupMetrics,
    pub groups: Vec<GroupMetrics>,
    pub warnings: Vec<String>,
}

impl MetricSet {
    pub fn group(&self, name: &str) -> Option<&GroupMetrics> {
        self.groups.iter().find(|g| g.group == name)
    }

    /// Lowest per-group AUROC among groups where it is defined.
    pub fn worst_group_auroc(&self) -> Option<f64> {
        self.groups.iter().filter_map(|g| g.auroc).reduce(f64::min)
    }
}

/// Evaluates every group of `frame` at one threshold chosen on the whole frame.
pub fn group_metrics(frame: &EvaluationFrame, policy: ThresholdPolicy, ece_bins: usize) -> Result<MetricSet> {
    let scores = frame.scores();
    let labels = frame.labels();
    let threshold = policy.resolve(&scores, &labels)?;
    let overall = GroupMetrics::evaluate("all", &scores, &labels, threshold, ece_bins)?;
    let mut groups = Vec::with_capacity(frame.group_universe.len());
    let mut warnings = Vec::new();
    for g in &frame.group_universe {
        let (s, l) = frame.group_slice(g);
        if s.is_empty() {
            warnings.push(format!("group `{g}` is empty and was skipped"));
            continue;
        }
        let gm = GroupMetrics::evaluate(g, &s, &l, threshold, ece_bins)?;
        if gm.auroc.is_none() {
            warnings.push(format!("group `{g}` lacks a class; AUROC not reported"));
        }
        groups.push(gm);
    }
    Ok(MetricSet {
        model_id: frame.model_id.clone(),
        dataset_id: frame.dataset_id.clone(),
        threshold,
        overall,
        groups,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarityMode {
    Underdiagnosis,
    Overdiagnosis,
}

impl FromStr for PolarityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "underdiagnosis" | "under" => Ok(PolarityMode::Underdiagnosis),
            "overdiagnosis" | "over" => Ok(PolarityMode::Overdiagnosis),
            _ => Err(Error::InvalidConfig(format!("unknown polarity `{s}`"))),
        }
    }
}

/// Which error rate a task's fairness gap is measured in.
///
/// Underdiagnosis: FPR for "No Finding" (a false "healthy" call), FNR for
/// disease tasks. Overdiagnosis swaps the two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPolarity {
    pub task: String,
    pub mode: PolarityMode,
}

pub const NO_FINDING: &str = "No Finding";

impl TaskPolarity {
    pub fn new(task: impl Into<String>, mode: PolarityMode) -> Self {
        Self {
            task: task.into(),
            mode,
        }
    }

    pub fn metric(&self) -> RateMetric {
        let no_finding = self.task.trim().eq_ignore_ascii_case(NO_FINDING);
        match (self.mode, no_finding) {
            (PolarityMode::Underdiagnosis, true) | (PolarityMode::Overdiagnosis, false) => RateMetric::Fpr,
            (PolarityMode::Underdiagnosis, false) | (PolarityMode::Overdiagnosis, true) => RateMetric::Fnr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessGap {
    pub metric: String,
    pub pair: GroupPair,
    pub value_g1: f64,
    pub value_g2: f64,
    pub signed_gap: f64,
    pub abs_gap: f64,
    pub threshold: f64,
}

impl FairnessGap {
    fn new(metric: &str, pair: &GroupPair, value_g1: f64, value_g2: f64, threshold: f64) -> Self {
        let signed_gap = value_g1 - value_g2;
        Self {
            metric: metric.to_string(),
            pair: pair.clone(),
            value_g1,
            value_g2,
            signed_gap,
            abs_gap: signed_gap.abs(),
            threshold,
        }
    }
}

/// Confusion counts of one group at `threshold`, failing if the group lacks
/// the class `metric` conditions on.
pub fn group_counts(frame: &EvaluationFrame, group: &str, metric: RateMetric, threshold: f64) -> Result<ConfusionCounts> {
    if !frame.has_group(group) {
        return Err(Error::UnknownGroup { group: group.into() });
    }
    let (s, l) = frame.group_slice(group);
    let counts = rates_at_threshold(&s, &l, threshold);
    let missing = match metric.conditioning() {
        Conditioning::Positives => (counts.positives() == 0).then_some("positive"),
        Conditioning::Negatives => (counts.negatives() == 0).then_some("negative"),
        Conditioning::All => None,
    };
    if let Some(class) = missing {
        return Err(Error::MissingClassInGroup {
            group: group.into(),
            metric: metric.to_string(),
            class: class.into(),
        });
    }
    Ok(counts)
}

/// Gap in one rate metric at a given threshold.
pub fn rate_gap(frame: &EvaluationFrame, pair: &GroupPair, metric: RateMetric, threshold: f64) -> Result<FairnessGap> {
    let v1 = group_counts(frame, &pair.g1, metric, threshold)?
        .rate(metric)
        .expect("conditioning class checked");
    let v2 = group_counts(frame, &pair.g2, metric, threshold)?
        .rate(metric)
        .expect("conditioning class checked");
    Ok(FairnessGap::new(metric.as_str(), pair, v1, v2, threshold))
}

/// Gap in the task's polarity-resolved error rate, at the frame-level
/// threshold chosen by `policy`.
pub fn fairness_gap(
    frame: &EvaluationFrame,
    pair: &GroupPair,
    polarity: &TaskPolarity,
    policy: ThresholdPolicy,
) -> Result<FairnessGap> {
    pair.check(frame)?;
    let threshold = policy.resolve(&frame.scores(), &frame.labels())?;
    rate_gap(frame, pair, polarity.metric(), threshold)
}

/// Gap in any named per-group metric of a computed [`MetricSet`].
pub fn metric_gap(set: &MetricSet, pair: &GroupPair, name: &str) -> Result<FairnessGap> {
    let value = |g: &str| -> Result<f64> {
        let gm = set.group(g).ok_or_else(|| Error::UnknownGroup { group: g.into() })?;
        gm.value(name).ok_or_else(|| Error::MissingClassInGroup {
            group: g.into(),
            metric: name.into(),
            class: "required".into(),
        })
    };
    Ok(FairnessGap::new(name, pair, value(&pair.g1)?, value(&pair.g2)?, set.threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint<T> {
    pub model_id: String,
    /// Higher is better (overall or worst-group AUROC).
    pub performance: T,
    /// Lower is better (absolute fairness gap).
    pub gap: T,
}

impl<T: Scalar> ParetoPoint<T> {
    pub fn new(model_id: impl Into<String>, performance: T, gap: T) -> Self {
        Self {
            model_id: model_id.into(),
            performance,
            gap,
        }
    }

    pub fn dominates(&self, other: &Self) -> bool {
        self.performance >= other.performance
            && self.gap <= other.gap
            && (self.performance > other.performance || self.gap < other.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront<T> {
    /// Non-dominated points, performance descending, then gap ascending.
    pub front: Vec<ParetoPoint<T>>,
}

impl<T> ParetoFront<T> {
    pub fn contains(&self, model_id: &str) -> bool {
        self.front.iter().any(|p| p.model_id == model_id)
    }
}

fn front_order<T: Scalar>(a: &ParetoPoint<T>, b: &ParetoPoint<T>) -> Ordering {
    b.performance
        .partial_cmp(&a.performance)
        .unwrap_or(Ordering::Equal)
        .then(a.gap.partial_cmp(&b.gap).unwrap_or(Ordering::Equal))
        .then_with(|| a.model_id.cmp(&b.model_id))
}

/// Non-dominated subset of `points` in the (performance up, gap down) plane.
/// Points with identical coordinates are all kept.
pub fn pareto_front<T: Scalar>(points: &[ParetoPoint<T>]) -> Result<ParetoFront<T>> {
    if points.iter().any(|p| !p.performance.is_finite() || !p.gap.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut sorted: Vec<&ParetoPoint<T>> = points.iter().collect();
    sorted.sort_by(|a, b| front_order(a, b));

    // Sweep blocks of equal performance from best to worst. A point survives
    // if its gap is the block minimum and strictly below every better block.
    let mut front = Vec::new();
    let mut best_gap_above = T::infinity();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].performance == sorted[i].performance {
            j += 1;
        }
        let block_min = sorted[i].gap;
        if block_min < best_gap_above {
            front.extend(
                sorted[i..j]
                    .iter()
                    .take_while(|p| p.gap == block_min)
                    .map(|p| (*p).clone()),
            );
            best_gap_above = block_min;
        }
        i = j;
    }
    Ok(ParetoFront { front })
}

/// Pearson correlation of two named metrics over a model grid, keeping only
/// models whose overall validation AUROC is at least `min_overall_auroc`.
pub fn tradeoff_correlation(
    grid: &[ModelSummary],
    x_metric: &str,
    y_metric: &str,
    min_overall_auroc: f64,
) -> Result<CorrelationResult<f64>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for m in grid {
        if m.overall_auroc().is_some_and(|a| a < min_overall_auroc) {
            continue;
        }
        xs.push(m.require(x_metric)?);
        ys.push(m.require(y_metric)?);
    }
    if xs.len() < 3 {
        return Err(Error::TooFewModels {
            required: 3,
            found: xs.len(),
        });
    }
    pearson(&xs, &ys)
}
