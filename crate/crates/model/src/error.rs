use std::path::PathBuf;

use thiserror::Error;

/// Errors from model construction, training, persistence, and latent search.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("attention heads ({heads}) must divide the embedding width ({dim})")]
    HeadsDontDivide { heads: usize, dim: usize },

    #[error("{what} must be positive")]
    NonPositiveDimension { what: &'static str },

    #[error("loss weight {name} must be nonnegative, got {value}")]
    NegativeWeight { name: &'static str, value: f64 },

    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),

    #[error("token id {token} is outside the vocabulary of size {vocab_size}")]
    TokenOutOfVocabulary { token: u32, vocab_size: usize },

    #[error("mask length {mask} does not match sequence length {ids}")]
    MaskMismatch { ids: usize, mask: usize },

    #[error("sequence has no unmasked positions")]
    NoRealPositions,

    #[error("sequence of {len} positions exceeds the positional table ({max})")]
    SequenceTooLong { len: usize, max: usize },

    #[error("decoder prefix must begin with the start token")]
    PrefixMissingStart,

    #[error("latent vector has {got} dimensions, model expects {want}")]
    LatentDimMismatch { got: usize, want: usize },

    #[error("noise vector has {got} dimensions, model expects {want}")]
    NoiseDimMismatch { got: usize, want: usize },

    #[error("training corpus holds no records")]
    EmptyCorpus,

    #[error("training diverged at epoch {epoch}: total loss {total}")]
    Diverged { epoch: usize, total: f64 },

    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to encode or decode JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("checkpoint is not in a recognized format: {0}")]
    UnknownFormat(String),

    #[error("checkpoint is missing parameter tensor '{0}'")]
    MissingParam(String),

    #[error("checkpoint holds unexpected parameter tensor '{0}'")]
    UnexpectedParam(String),

    #[error("parameter '{name}' has shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    ShapeMismatch {
        name: String,
        want_rows: usize,
        want_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    #[error("ascent step size must be positive, got {0}")]
    BadStepSize(f64),

    #[error("search trade-off must be nonnegative, got {0}")]
    NegativeTradeoff(f64),

    #[error("gradient ascent produced a non-finite value at step {step}")]
    AscentDiverged { step: usize },

    #[error("decoding terminated before emitting any feature token")]
    EmptyDecode,

    #[error("every search start failed")]
    AllStartsFailed,

    #[error(transparent)]
    Core(#[from] fsns_core::CoreError),

    #[error(transparent)]
    Collect(#[from] fsns_collect::CollectError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
