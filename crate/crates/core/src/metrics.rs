//! Classification and calibration metrics on score/label vectors.
//!
//! Labels are `u8` with `1` the positive class; any other value counts as
//! negative. A sample is predicted positive iff `score >= threshold`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_ECE_BINS: usize = 10;

fn check_inputs<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

fn cmp_scalar<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Area under the ROC curve as the normalized Mann-Whitney statistic with
/// midranks, i.e. `P(pos > neg) + P(pos == neg) / 2`.
pub fn auroc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp_scalar(&scores[a], &scores[b]));

    // Ranks are doubled so that midranks stay integral.
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j) as u64;
        let pos_in_block = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        pos_rank_sum2 += midrank2 * pos_in_block;
        i = j;
    }
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(T::of(u2 as f64) / T::of((2 * n_pos * n_neg) as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.negatives())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }

    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.positives())
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        self.tpr()
    }

    /// `2tp / (2tp + fp + fn)`; zero when there is nothing to predict or find.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_).unwrap_or(0.0)
    }

    pub fn rate(&self, metric: RateMetric) -> Option<f64> {
        match metric {
            RateMetric::Accuracy => self.accuracy(),
            RateMetric::Tpr => self.tpr(),
            RateMetric::Tnr => self.tnr(),
            RateMetric::Fpr => self.fpr(),
            RateMetric::Fnr => self.fnr(),
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Error or success rates that average a per-sample 0/1 loss over a
/// label-conditioned subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMetric {
    Accuracy,
    Tpr,
    Tnr,
    Fpr,
    Fnr,
}

/// Which samples a [`RateMetric`] averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    All,
    Positives,
    Negatives,
}

impl RateMetric {
    pub const ALL: [RateMetric; 5] = [
        RateMetric::Accuracy,
        RateMetric::Tpr,
        RateMetric::Tnr,
        RateMetric::Fpr,
        RateMetric::Fnr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RateMetric::Accuracy => "accuracy",
            RateMetric::Tpr => "tpr",
            RateMetric::Tnr => "tnr",
            RateMetric::Fpr => "fpr",
            RateMetric::Fnr => "fnr",
        }
    }

    pub fn conditioning(self) -> Conditioning {
        match self {
            RateMetric::Accuracy => Conditioning::All,
            RateMetric::Tpr | RateMetric::Fnr => Conditioning::Positives,
            RateMetric::Tnr | RateMetric::Fpr => Conditioning::Negatives,
        }
    }

    /// Per-sample 0/1 loss whose conditional mean is this metric.
    pub fn sample_loss(self, predicted_positive: bool, label: u8) -> Option<f64> {
        let positive = label == 1;
        let hit = match self.conditioning() {
            Conditioning::All => predicted_positive == positive,
            Conditioning::Positives if positive => match self {
                RateMetric::Tpr => predicted_positive,
                _ => !predicted_positive,
            },
            Conditioning::Negatives if !positive => match self {
                RateMetric::Tnr => !predicted_positive,
                _ => predicted_positive,
            },
            _ => return None,
        };
        Some(if hit { 1.0 } else { 0.0 })
    }
}

impl fmt::Display for RateMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RateMetric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown rate metric `{s}`")))
    }
}

pub fn rates_at_threshold<T: Scalar>(scores: &[T], labels: &[u8], threshold: T) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Candidate thresholds for F1 search: 0, 1, and the midpoints between
/// consecutive distinct scores, ascending.
pub fn f1_candidates<T: Scalar>(scores: &[T]) -> Vec<T> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(cmp_scalar);
    sorted.dedup();
    let mut out = vec![T::zero(), T::one()];
    out.extend(sorted.windows(2).map(|w| (w[0] + w[1]) * T::half()));
    out.sort_by(cmp_scalar);
    out.dedup();
    out
}

/// Smallest threshold maximizing F1 among [`f1_candidates`].
pub fn select_f1_threshold<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut pairs: Vec<(T, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp_scalar(&a.0, &b.0));
    let n = pairs.len();
    // positives_below[k] = positives among the k smallest scores
    let mut positives_below = Vec::with_capacity(n + 1);
    positives_below.push(0usize);
    for &(_, l) in &pairs {
        positives_below.push(positives_below.last().unwrap() + usize::from(l == 1));
    }

    let mut best: Option<(T, u128, u128)> = None;
    for t in f1_candidates(scores) {
        let k = pairs.partition_point(|p| p.0 < t);
        let tp = (n_pos - positives_below[k]) as u128;
        // 2tp + fp + fn = predicted positives + actual positives
        let num = 2 * tp;
        let den = ((n - k) + n_pos) as u128;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    Ok(best.expect("candidate set is never empty").0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    Fixed(f64),
    F1Max,
}

impl ThresholdPolicy {
    pub fn resolve<T: Scalar>(&self, scores: &[T], labels: &[u8]) -> Result<T> {
        match *self {
            ThresholdPolicy::Fixed(t) => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::InvalidConfig(format!("threshold {t} outside [0, 1]")));
                }
                Ok(T::of(t))
            }
            ThresholdPolicy::F1Max => select_f1_threshold(scores, labels),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = Error;

    /// `f1` / `f1_max`, or a literal threshold in `[0, 1]`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" | "f1_max" | "f1max" => Ok(ThresholdPolicy::F1Max),
            other => match other.parse::<f64>() {
                Ok(t) if (0.0..=1.0).contains(&t) => Ok(ThresholdPolicy::Fixed(t)),
                _ => Err(Error::InvalidConfig(format!("bad threshold policy `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin<T> {
    pub lower: T,
    pub upper: T,
    pub count: usize,
    pub mean_confidence: T,
    pub accuracy: T,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBins<T> {
    pub n_bins: usize,
    /// Non-empty bins only, in ascending order.
    pub bins: Vec<CalibrationBin<T>>,
}

impl<T: Scalar> CalibrationBins<T> {
    pub fn ece(&self) -> T {
        self.bins
            .iter()
            .map(|b| b.weight * (b.accuracy - b.mean_confidence).abs())
            .sum()
    }
}

/// Equal-width reliability bins on `[0, 1]`; the last bin is closed.
pub fn calibration_bins<T: Scalar>(scores: &[T], labels: &[u8], n_bins: usize) -> Result<CalibrationBins<T>> {
    check_inputs(scores, labels)?;
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be positive".into()));
    }
    let mut conf = vec![T::zero(); n_bins];
    let mut hits = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    let nb = T::of_usize(n_bins);
    for (&s, &l) in scores.iter().zip(labels) {
        let raw = (s * nb).floor();
        let idx = if raw <= T::zero() {
            0
        } else {
            raw.to_usize().unwrap_or(n_bins - 1).min(n_bins - 1)
        };
        conf[idx] = conf[idx] + s;
        hits[idx] += usize::from(l == 1);
        counts[idx] += 1;
    }
    let total = T::of_usize(scores.len());
    let bins = (0..n_bins)
        .filter(|&k| counts[k] > 0)
        .map(|k| {
            let c = T::of_usize(counts[k]);
            CalibrationBin {
                lower: T::of_usize(k) / nb,
                upper: T::of_usize(k + 1) / nb,
                count: counts[k],
                mean_confidence: conf[k] / c,
                accuracy: T::of_usize(hits[k]) / c,
                weight: c / total,
            }
        })
        .collect();
    Ok(CalibrationBins { n_bins, bins })
}

/// Expected calibration error over `n_bins` equal-width bins.
pub fn ece<T: Scalar>(scores: &[T], labels: &[u8], n_bins: usize) -> Result<T> {
    Ok(calibration_bins(scores, labels, n_bins)?.ece())
}

/// Step-wise average precision over descending-score prefixes; tied scores
/// enter a prefix together.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp_scalar(&scores[b], &scores[a]));
    let p = T::of_usize(n_pos);
    let mut ap = T::zero();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let block_tp = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        tp += block_tp;
        seen += j - i;
        if block_tp > 0 {
            ap = ap + (T::of_usize(block_tp) / p) * (T::of_usize(tp) / T::of_usize(seen));
        }
        i = j;
    }
    Ok(ap)
}
