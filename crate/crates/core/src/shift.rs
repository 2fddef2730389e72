//! Out-of-distribution fairness: the exact gap decomposition and ID-to-OOD
//! transfer of performance, fairness and Pareto optimality.
//!
//! For a sample-decomposable metric `L` and groups `g1`, `g2`:
//!
//! ```text
//! L(g1,tar) - L(g2,tar) = [L(g1,src) - L(g2,src)]
//!                       + [L(g2,src) - L(g2,tar)]
//!                       - [L(g1,src) - L(g1,tar)]
//! ```

use crate::datamodel::{EvaluationFrame, GroupPair};
use crate::error::{Error, Result};
use crate::fairness::{group_counts, pareto_front, ParetoFront, ParetoPoint};
use crate::metrics::{RateMetric, ThresholdPolicy};
use crate::scalar::Scalar;
use crate::stats::{pearson, CorrelationResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Metrics that average a per-sample 0/1 loss and so decompose exactly.
pub type DecomposableMetric = RateMetric;

/// Largest tolerated floating-point residual of the identity.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDecomposition<T> {
    pub metric: DecomposableMetric,
    pub pair: GroupPair,
    pub id_gap: T,
    /// `L(g2, src) - L(g2, tar)`
    pub shift_impact_g2: T,
    /// `L(g1, src) - L(g1, tar)`
    pub shift_impact_g1: T,
    pub ood_gap: T,
    /// `ood_gap - (id_gap + shift_impact_g2 - shift_impact_g1)`
    pub residual: T,
}

impl<T: Scalar> GapDecomposition<T> {
    /// Builds the decomposition from the four group-level metric values. The
    /// OOD gap is computed directly, so `residual` measures rounding only.
    pub fn from_rates(metric: DecomposableMetric, pair: GroupPair, g1_src: T, g2_src: T, g1_tar: T, g2_tar: T) -> Self {
        let id_gap = g1_src - g2_src;
        let shift_impact_g2 = g2_src - g2_tar;
        let shift_impact_g1 = g1_src - g1_tar;
        let ood_gap = g1_tar - g2_tar;
        let residual = ood_gap - (id_gap + shift_impact_g2 - shift_impact_g1);
        Self {
            metric,
            pair,
            id_gap,
            shift_impact_g2,
            shift_impact_g1,
            ood_gap,
            residual,
        }
    }

    /// Reconstructs the OOD gap from an ID gap and the per-group changes
    /// `tar - src` (the "change in metric" a waterfall narrates).
    pub fn from_changes(metric: DecomposableMetric, pair: GroupPair, id_gap: T, change_g1: T, change_g2: T) -> Self {
        let shift_impact_g1 = -change_g1;
        let shift_impact_g2 = -change_g2;
        Self {
            metric,
            pair,
            id_gap,
            shift_impact_g2,
            shift_impact_g1,
            ood_gap: id_gap + shift_impact_g2 - shift_impact_g1,
            residual: T::zero(),
        }
    }

    /// Waterfall terms in display order.
    pub fn terms(&self) -> [(&'static str, T); 4] {
        [
            ("id_gap", self.id_gap),
            ("shift_impact_g2", self.shift_impact_g2),
            ("shift_impact_g1", self.shift_impact_g1),
            ("ood_gap", self.ood_gap),
        ]
    }

    /// Per-group change in the metric, `tar - src`.
    pub fn change_g1(&self) -> T {
        -self.shift_impact_g1
    }

    pub fn change_g2(&self) -> T {
        -self.shift_impact_g2
    }
}

/// How the operating point is chosen on each frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Resolve the policy on each frame separately.
    PerFrame(ThresholdPolicy),
    /// Resolve on the source frame and reuse that threshold on the target.
    FrozenSource(ThresholdPolicy),
}

impl ThresholdMode {
    pub fn thresholds(&self, src: &EvaluationFrame, tar: &EvaluationFrame) -> Result<(f64, f64)> {
        match *self {
            ThresholdMode::PerFrame(p) => Ok((
                p.resolve(&src.scores(), &src.labels())?,
                p.resolve(&tar.scores(), &tar.labels())?,
            )),
            ThresholdMode::FrozenSource(p) => {
                let t = p.resolve(&src.scores(), &src.labels())?;
                Ok((t, t))
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ThresholdMode::PerFrame(_) => "per_frame",
            ThresholdMode::FrozenSource(_) => "frozen_source",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecomposition {
    pub decomposition: GapDecomposition<f64>,
    pub threshold_src: f64,
    pub threshold_tar: f64,
    pub threshold_mode: String,
}

pub fn decompose_gap(
    src: &EvaluationFrame,
    tar: &EvaluationFrame,
    metric: DecomposableMetric,
    pair: &GroupPair,
    mode: ThresholdMode,
) -> Result<FrameDecomposition> {
    if src.model_id != tar.model_id {
        return Err(Error::ModelMismatch {
            src: src.model_id.clone(),
            tar: tar.model_id.clone(),
        });
    }
    pair.check(src)?;
    pair.check(tar)?;
    let (t_src, t_tar) = mode.thresholds(src, tar)?;
    let rate = |frame: &EvaluationFrame, g: &str, t: f64| -> Result<f64> {
        Ok(group_counts(frame, g, metric, t)?
            .rate(metric)
            .expect("conditioning class checked"))
    };
    let decomposition = GapDecomposition::from_rates(
        metric,
        pair.clone(),
        rate(src, &pair.g1, t_src)?,
        rate(src, &pair.g2, t_src)?,
        rate(tar, &pair.g1, t_tar)?,
        rate(tar, &pair.g2, t_tar)?,
    );
    Ok(FrameDecomposition {
        decomposition,
        threshold_src: t_src,
        threshold_tar: t_tar,
        threshold_mode: mode.label().to_string(),
    })
}

/// One model's AUROC and absolute fairness gap in one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub model_id: String,
    pub auroc: f64,
    pub abs_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub performance: CorrelationResult<f64>,
    pub fairness: CorrelationResult<f64>,
    pub n_models: usize,
    pub models: Vec<String>,
    pub min_id_auroc: Option<f64>,
    /// Fairness correlations use absolute gaps.
    pub gap_kind: String,
}

/// Pearson correlations of ID vs OOD AUROC and ID vs OOD absolute gap over
/// the models present in both grids (sorted by id).
pub fn transfer_correlation(
    grid_src: &[TransferPoint],
    grid_tar: &[TransferPoint],
    min_id_auroc: Option<f64>,
) -> Result<TransferReport> {
    let tar: BTreeMap<&str, &TransferPoint> = grid_tar.iter().map(|p| (p.model_id.as_str(), p)).collect();
    let src: BTreeMap<&str, &TransferPoint> = grid_src.iter().map(|p| (p.model_id.as_str(), p)).collect();
    let mut models = Vec::new();
    let (mut a_src, mut a_tar, mut g_src, mut g_tar) = (vec![], vec![], vec![], vec![]);
    for (id, s) in src {
        let Some(t) = tar.get(id) else { continue };
        if min_id_auroc.is_some_and(|m| s.auroc < m) {
            continue;
        }
        models.push(id.to_string());
        a_src.push(s.auroc);
        a_tar.push(t.auroc);
        g_src.push(s.abs_gap);
        g_tar.push(t.abs_gap);
    }
    if models.len() < 3 {
        return Err(Error::TooFewModels {
            required: 3,
            found: models.len(),
        });
    }
    Ok(TransferReport {
        performance: pearson(&a_src, &a_tar)?,
        fairness: pearson(&g_src, &g_tar)?,
        n_models: models.len(),
        models,
        min_id_auroc,
        gap_kind: "absolute".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCoordinates<T> {
    pub model_id: String,
    pub id_performance: T,
    pub id_gap: T,
    pub ood_performance: T,
    pub ood_gap: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoTransfer<T> {
    pub front_id: ParetoFront<T>,
    pub front_ood: ParetoFront<T>,
    /// Models on both fronts, sorted.
    pub retained: Vec<String>,
    pub retention_rate: T,
}

pub fn pareto_transfer<T: Scalar>(grid: &[TransferCoordinates<T>]) -> Result<ParetoTransfer<T>> {
    let id_points: Vec<ParetoPoint<T>> = grid
        .iter()
        .map(|c| ParetoPoint::new(&c.model_id, c.id_performance, c.id_gap))
        .collect();
    let ood_points: Vec<ParetoPoint<T>> = grid
        .iter()
        .map(|c| ParetoPoint::new(&c.model_id, c.ood_performance, c.ood_gap))
        .collect();
    let front_id = pareto_front(&id_points)?;
    let front_ood = pareto_front(&ood_points)?;
    let mut retained: Vec<String> = front_id
        .front
        .iter()
        .filter(|p| front_ood.contains(&p.model_id))
        .map(|p| p.model_id.clone())
        .collect();
    retained.sort();
    retained.dedup();
    let retention_rate = if front_id.front.is_empty() {
        T::one()
    } else {
        T::of_usize(retained.len()) / T::of_usize(front_id.front.len())
    };
    Ok(ParetoTransfer {
        front_id,
        front_ood,
        retained,
        retention_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> GroupPair {
        GroupPair::new("female", "male").unwrap()
    }

    #[test]
    fn waterfall_reconstruction_in_points() {
        // ID gap -0.1pp, FPR change +3.9pp (female) and +0.8pp (male)
        let d = GapDecomposition::from_changes(RateMetric::Fpr, pair(), -0.1, 3.9, 0.8);
        assert!((d.ood_gap - 3.0f64).abs() < 1e-12);
        assert!((d.ood_gap - 3.2f64).abs() <= 0.3);
        assert_eq!(d.change_g1(), 3.9);
    }

    #[test]
    fn planted_rates_arithmetic() {
        let d = GapDecomposition::from_rates(RateMetric::Fpr, pair(), 0.10, 0.10, 0.20, 0.12);
        assert!((d.ood_gap - 0.08f64).abs() < 1e-15);
        assert!((d.shift_impact_g2 - -0.02f64).abs() < 1e-15);
        assert!((d.shift_impact_g1 - -0.10f64).abs() < 1e-15);
        assert!(d.residual.abs() <= RESIDUAL_TOLERANCE);
    }

    #[test]
    fn transfer_identity_and_flip() {
        let src: Vec<TransferPoint> = [(0.8, 0.1), (0.85, 0.05), (0.9, 0.2), (0.7, 0.3)]
            .iter()
            .enumerate()
            .map(|(i, &(a, g))| TransferPoint {
                model_id: format!("m{i}"),
                auroc: a,
                abs_gap: g,
            })
            .collect();
        let same = transfer_correlation(&src, &src, None).unwrap();
        assert!((same.performance.r - 1.0).abs() < 1e-12);
        assert!((same.fairness.r - 1.0).abs() < 1e-12);

        let flipped: Vec<TransferPoint> = src
            .iter()
            .map(|p| TransferPoint {
                abs_gap: 1.0 - p.abs_gap,
                auroc: p.auroc - 0.1,
                ..p.clone()
            })
            .collect();
        let r = transfer_correlation(&src, &flipped, None).unwrap();
        assert!((r.fairness.r + 1.0).abs() < 1e-12);
        assert!(r.performance.r > 0.0);

        assert!(matches!(
            transfer_correlation(&src[..2], &src[..2], None),
            Err(Error::TooFewModels { .. })
        ));
    }

    #[test]
    fn pareto_transfer_cases() {
        let c = |id: &str, a: f64, g: f64, oa: f64, og: f64| TransferCoordinates {
            model_id: id.into(),
            id_performance: a,
            id_gap: g,
            ood_performance: oa,
            ood_gap: og,
        };
        let same: Vec<_> = [("a", 0.9, 0.2), ("b", 0.8, 0.1)]
            .iter()
            .map(|&(i, a, g)| c(i, a, g, a, g))
            .collect();
        assert_eq!(pareto_transfer(&same).unwrap().retention_rate, 1.0);
        assert_eq!(pareto_transfer(&same[..1]).unwrap().retention_rate, 1.0);

        // ID front {a, b, c}; OOD: c (the ID gap-minimizer) is dominated by d
        let grid = vec![
            c("a", 0.90, 0.20, 0.85, 0.22),
            c("b", 0.85, 0.10, 0.80, 0.12),
            c("c", 0.80, 0.05, 0.70, 0.15),
            c("d", 0.75, 0.30, 0.78, 0.09),
        ];
        let t = pareto_transfer(&grid).unwrap();
        let id_front: Vec<&str> = t.front_id.front.iter().map(|p| p.model_id.as_str()).collect();
        let ood_front: Vec<&str> = t.front_ood.front.iter().map(|p| p.model_id.as_str()).collect();
        assert_eq!(id_front, vec!["a", "b", "c"]);
        assert_eq!(ood_front, vec!["a", "b", "d"]);
        assert_eq!(t.retained, vec!["a", "b"]);
        assert!((t.retention_rate - 2.0 / 3.0).abs() < 1e-15);
    }
}
