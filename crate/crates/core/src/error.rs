use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed JSON at line {line}: {message}")]
    Json { line: usize, message: String },

    #[error("missing column `{column}` (row {row})")]
    MissingColumn { row: usize, column: String },
    #[error("row {row}: score {value} is outside [0, 1]")]
    OutOfRangeScore { row: usize, value: String },
    #[error("row {row}: label `{value}` is not 0 or 1")]
    NonBinaryLabel { row: usize, value: String },
    #[error("row {row}: split `{value}` is not one of train, val, test")]
    InvalidSplit { row: usize, value: String },
    #[error("row {row}: field `{field}` could not be parsed: `{value}`")]
    BadField {
        row: usize,
        field: String,
        value: String,
    },
    #[error("row {row}: duplicate key {key}")]
    DuplicateKey { row: usize, key: String },
    #[error("model `{model_id}`: embedding dimension {found} conflicts with {expected}")]
    DimensionMismatch {
        model_id: String,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: non-finite entry in column `{column}`")]
    NonFiniteEntry { row: usize, column: String },
    #[error("no records match model `{model_id}`, dataset `{dataset_id}`, split `{split}`")]
    EmptyFrame {
        model_id: String,
        dataset_id: String,
        split: String,
    },
    #[error("group `{group}` is not present in the frame")]
    UnknownGroup { group: String },
    #[error("group pair must name two distinct groups, got `{0}` twice")]
    SameGroup(String),

    #[error("labels are degenerate: need at least one positive and one negative")]
    DegenerateLabels,
    #[error("input vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("input vector is constant")]
    ConstantVector,
    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("non-finite value in input")]
    NonFiniteInput,

    #[error("group `{group}` has no {class} samples, so {metric} is undefined")]
    MissingClassInGroup {
        group: String,
        metric: String,
        class: String,
    },
    #[error("frames belong to different models (`{src}` vs `{tar}`)")]
    ModelMismatch { src: String, tar: String },
    #[error("need at least {required} models after filtering, got {found}")]
    TooFewModels { required: usize, found: usize },

    #[error("training split contains a single class")]
    SingleClassTrain,
    #[error("probe expects {expected} features, got {found}")]
    FeatureMismatch { expected: usize, found: usize },

    #[error("grid has no ERM model with a validation AUROC")]
    NoErmBaseline,
    #[error("model `{model_id}` lacks metric `{metric}`")]
    MissingMetric { model_id: String, metric: String },
    #[error("model `{model_id}` has no OOD gap")]
    MissingOodGap { model_id: String },
    #[error("setting `{0}` has no models")]
    EmptySetting(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent input files and
    /// configuration, as opposed to failures inside an analysis.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Json { .. }
                | Error::MissingColumn { .. }
                | Error::OutOfRangeScore { .. }
                | Error::NonBinaryLabel { .. }
                | Error::InvalidSplit { .. }
                | Error::BadField { .. }
                | Error::DuplicateKey { .. }
                | Error::DimensionMismatch { .. }
                | Error::NonFiniteEntry { .. }
                | Error::EmptyFrame { .. }
                | Error::UnknownGroup { .. }
                | Error::SameGroup(_)
                | Error::InvalidConfig(_)
        )
    }
}
