use super::{PredictionRecord, Split};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// The joined cohort for one (model, dataset, split) slice, restricted to
/// records that carry the attribute of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationFrame {
    pub model_id: String,
    pub dataset_id: String,
    pub split: Split,
    pub attribute: String,
    pub records: Vec<PredictionRecord>,
    /// Distinct group labels, sorted lexicographically.
    pub group_universe: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuild {
    pub frame: EvaluationFrame,
    /// Matching records dropped because the attribute value was missing.
    pub dropped: usize,
}

pub fn build_frame(
    records: &[PredictionRecord],
    model_id: &str,
    dataset_id: &str,
    split: Split,
    attribute: &str,
) -> Result<FrameBuild> {
    let mut kept = Vec::new();
    let mut dropped = 0;
    for r in records
        .iter()
        .filter(|r| r.model_id == model_id && r.dataset_id == dataset_id && r.split == split)
    {
        if r.attribute(attribute).is_some() {
            kept.push(r.clone());
        } else {
            dropped += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyFrame {
            model_id: model_id.into(),
            dataset_id: dataset_id.into(),
            split: split.to_string(),
        });
    }
    let group_universe: BTreeSet<&str> = kept
        .iter()
        .filter_map(|r| r.attribute(attribute))
        .collect();
    let group_universe = group_universe.into_iter().map(String::from).collect();
    Ok(FrameBuild {
        frame: EvaluationFrame {
            model_id: model_id.into(),
            dataset_id: dataset_id.into(),
            split,
            attribute: attribute.into(),
            records: kept,
            group_universe,
        },
        dropped,
    })
}

impl EvaluationFrame {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn group_of<'r>(&self, record: &'r PredictionRecord) -> &'r str {
        record.attribute(&self.attribute).unwrap_or("")
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.group_universe.iter().any(|g| g == group)
    }

    /// Scores and labels of one group, in frame order.
    pub fn group_slice(&self, group: &str) -> (Vec<f64>, Vec<u8>) {
        self.records
            .iter()
            .filter(|r| self.group_of(r) == group)
            .map(|r| (r.score, r.label))
            .unzip()
    }
}

/// Ordered pair of groups; gaps are reported as `metric(g1) - metric(g2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupPair {
    pub g1: String,
    pub g2: String,
}

impl GroupPair {
    pub fn new(g1: impl Into<String>, g2: impl Into<String>) -> Result<Self> {
        let (g1, g2) = (g1.into(), g2.into());
        if g1 == g2 {
            return Err(Error::SameGroup(g1));
        }
        Ok(Self { g1, g2 })
    }

    pub fn swapped(&self) -> Self {
        Self {
            g1: self.g2.clone(),
            g2: self.g1.clone(),
        }
    }

    /// Checks both groups against the frame's group universe.
    pub fn check(&self, frame: &EvaluationFrame) -> Result<()> {
        for g in [&self.g1, &self.g2] {
            if !frame.has_group(g) {
                return Err(Error::UnknownGroup { group: g.clone() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn rec(i: usize, model: &str, sex: &str) -> PredictionRecord {
        let mut attributes = BTreeMap::new();
        attributes.insert("sex".to_string(), sex.to_string());
        PredictionRecord {
            sample_id: format!("s{i}"),
            model_id: model.into(),
            dataset_id: "d".into(),
            split: Split::Test,
            score: 0.5,
            label: (i % 2) as u8,
            attributes,
        }
    }

    fn ten() -> Vec<PredictionRecord> {
        let mut v = Vec::new();
        for i in 0..6 {
            v.push(rec(i, "m1", if i == 0 { "" } else if i % 2 == 0 { "male" } else { "female" }));
        }
        for i in 6..10 {
            v.push(rec(i, "m2", "male"));
        }
        v
    }

    #[test]
    fn filters_and_counts_drops() {
        let b = build_frame(&ten(), "m1", "d", Split::Test, "sex").unwrap();
        assert_eq!(b.frame.len() + b.dropped, 6);
        assert_eq!(b.dropped, 1);
        assert_eq!(b.frame.group_universe, vec!["female", "male"]);
    }

    #[test]
    fn absent_model_is_empty_frame() {
        assert!(matches!(
            build_frame(&ten(), "nope", "d", Split::Test, "sex"),
            Err(Error::EmptyFrame { .. })
        ));
    }

    #[test]
    fn rebuilding_is_idempotent() {
        let b = build_frame(&ten(), "m1", "d", Split::Test, "sex").unwrap();
        let again = build_frame(&b.frame.records, "m1", "d", Split::Test, "sex").unwrap();
        assert_eq!(again.frame, b.frame);
        assert_eq!(again.dropped, 0);
    }

    #[test]
    fn pair_validation() {
        assert!(GroupPair::new("a", "a").is_err());
        let b = build_frame(&ten(), "m1", "d", Split::Test, "sex").unwrap();
        assert!(GroupPair::new("female", "x").unwrap().check(&b.frame).is_err());
        assert!(GroupPair::new("female", "male").unwrap().check(&b.frame).is_ok());
    }
}
