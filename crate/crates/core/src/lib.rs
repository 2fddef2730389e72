//! Fairness-under-distribution-shift auditing for exported model
//! predictions and embeddings.
//!
//! Numeric kernels are generic over [`Scalar`]; the aliases below fix them
//! to `f64` (the reporting precision) or `f32`.

pub mod cli;
pub mod datamodel;
pub mod error;
pub mod fairness;
pub mod grid;
pub mod metrics;
pub mod pipeline;
pub mod probe;
pub mod report;
pub mod scalar;
pub mod select;
pub mod shift;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CalibrationBinsF64 = metrics::CalibrationBins<f64>;
pub type CorrelationResultF64 = stats::CorrelationResult<f64>;
pub type ParetoPointF64 = fairness::ParetoPoint<f64>;
pub type ParetoFrontF64 = fairness::ParetoFront<f64>;
pub type GapDecompositionF64 = shift::GapDecomposition<f64>;
pub type ParetoTransferF64 = shift::ParetoTransfer<f64>;
pub type MatrixF64 = probe::Matrix<f64>;
pub type LabeledEmbeddingsF64 = probe::LabeledEmbeddings<f64>;
pub type ProbeModelF64 = probe::ProbeModel<f64>;

pub type CorrelationResultF32 = stats::CorrelationResult<f32>;
pub type ParetoFrontF32 = fairness::ParetoFront<f32>;
pub type GapDecompositionF32 = shift::GapDecomposition<f32>;
pub type LabeledEmbeddingsF32 = probe::LabeledEmbeddings<f32>;
pub type ProbeModelF32 = probe::ProbeModel<f32>;
