use thiserror::Error;

/// Errors produced by dataset ingestion, splitting, scoring, and redundancy metrics.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path} as csv: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("label column {name:?} not found; available columns: {available:?}")]
    MissingLabelColumn { name: String, available: Vec<String> },

    #[error("row {row}: label {value:?} is not numeric but the task is regression")]
    NonNumericLabel { row: usize, value: String },

    #[error("no usable rows remain after dropping rows with missing values")]
    NoUsableRows,

    #[error("dataset needs at least {min} {what}, got {got}")]
    DatasetTooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("classification labels must be non-negative integers, got {0}")]
    BadClassLabel(f64),

    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadSplitFraction(f64),

    #[error("split leaves the {side} side empty ({n_samples} samples, test fraction {fraction})")]
    EmptySplitSide {
        side: &'static str,
        n_samples: usize,
        fraction: f64,
    },

    #[error("feature subset is empty")]
    EmptySubset,

    #[error("feature index {index} out of range for {n_features} features")]
    FeatureOutOfRange { index: usize, n_features: usize },

    #[error("feature index {0} appears more than once in the subset")]
    DuplicateFeature(usize),

    #[error("exhaustive enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { got: usize, max: usize },

    #[error("input vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),

    #[error("full-set redundancy must be positive to normalize, got {0}")]
    NonPositiveBaseline(f64),

    #[error("vectors must be non-empty")]
    EmptyVector,
}

pub type Result<T> = std::result::Result<T, CoreError>;
