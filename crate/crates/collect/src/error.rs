use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while collecting subset records or building token corpora.
#[derive(Debug, Error)]
pub enum CollectError {
    #[error(transparent)]
    Core(#[from] fsns_core::CoreError),

    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to encode or decode JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("neighbor count must be at least 1 and below the sample count ({n_samples}), got {k}")]
    BadNeighborCount { k: usize, n_samples: usize },

    #[error("pairwise distances are all zero; cannot derive a kernel bandwidth")]
    DegenerateGeometry,

    #[error("kernel bandwidth must be positive, got {0}")]
    BadBandwidth(f64),

    #[error("score vector has {scores} entries but the dataset has {n_features} features")]
    ScoreLengthMismatch { scores: usize, n_features: usize },

    #[error("collection requires at least 1 episode")]
    NoEpisodes,

    #[error("collection requires at least 1 step per episode")]
    NoSteps,

    #[error("epsilon values must lie in [0, 1] with start >= end, got start {start} end {end}")]
    BadEpsilonSchedule { start: f64, end: f64 },

    #[error("collection log holds no records")]
    EmptyLog,

    #[error("subset record holds no tokens")]
    EmptyRecord,

    #[error("feature index {index} does not fit a vocabulary over {n_features} features")]
    FeatureOutOfVocabulary { index: usize, n_features: usize },

    #[error("token {token} is not a feature token in a vocabulary of size {size}")]
    NotAFeatureToken { token: u32, size: usize },

    #[error("sequence of {len} features needs {needed} positions but the limit is {max_len}")]
    SequenceTooLong {
        len: usize,
        needed: usize,
        max_len: usize,
    },

    #[error("corpus metadata mismatch: {0}")]
    CorruptCorpus(String),
}

pub type Result<T> = std::result::Result<T, CollectError>;
