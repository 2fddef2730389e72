//! Core record types, file ingestion and cohort assembly.

mod frame;
mod io;

pub use frame::{build_frame, EvaluationFrame, FrameBuild, GroupPair};
pub use io::{
    load_embeddings, load_predictions, load_registry, read_embeddings, read_predictions, read_registry,
    write_embeddings, write_embeddings_to, write_predictions, write_predictions_to, write_registry,
    write_registry_to, FileFormat,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

/// One model's prediction for one sample of one dataset split.
///
/// Attribute values are opaque group labels. An empty string means the value
/// is missing; such records are dropped when a frame is built for that
/// attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub model_id: String,
    pub dataset_id: String,
    pub split: Split,
    pub score: f64,
    pub label: u8,
    pub attributes: BTreeMap<String, String>,
}

impl PredictionRecord {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .get(name)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    pub algorithm: String,
    pub task: String,
    pub tuned_attribute: String,
    pub seed: i64,
    pub hparams: BTreeMap<String, String>,
    pub val_auroc: Option<f64>,
}

/// Penultimate-layer representation of one sample under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub sample_id: String,
    pub model_id: String,
    pub vector: Vec<f64>,
}
