//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Network construction violated a structural invariant.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// An input vector or configuration did not match the network's shape.
    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// A layer or neuron index was out of range.
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// The training data cannot be used (empty, single-class, bad labels...).
    #[error("training data error: {0}")]
    TrainingData(String),

    /// A caller-supplied parameter was outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Malformed input file contents.
    #[error("data format error: {0}")]
    DataFormat(String),

    /// Cosine similarity is undefined because a region normal is zero.
    #[error("undefined similarity: region normal is the zero vector")]
    UndefinedSimilarity,

    /// Paired differences have zero variance, so the t statistic is undefined.
    #[error("zero-variance differences: t statistic undefined")]
    ZeroVariance,

    /// Two paired lists had different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Requested prune width outside 1..=current width.
    #[error("prune width {requested} out of range 1..={width}")]
    PruneWidth { requested: usize, width: usize },

    /// A feature was constant on the training split, so range scaling is undefined.
    #[error("constant feature '{0}': range scaling undefined")]
    ConstantFeature(String),

    /// A named predictor does not exist in the dataset.
    #[error("unknown predictor '{0}'")]
    UnknownPredictor(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
