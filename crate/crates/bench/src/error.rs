use std::path::PathBuf;

use thiserror::Error;

/// Errors from synthetic data generation, baselines, configuration, and
/// pipeline orchestration.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{what} must be at least {min}, got {got}")]
    CountTooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("duplicate correlation must lie in [0, 1], got {0}")]
    BadCorrelation(f64),

    #[error("subset size k={k} must lie in 1..={n_features}")]
    BadSubsetSize { k: usize, n_features: usize },

    #[error("unknown {what}: {got:?}; expected one of {expected}")]
    UnknownName {
        what: &'static str,
        got: String,
        expected: &'static str,
    },

    #[error("configuration error: {0}")]
    BadConfig(String),

    #[error("failed to parse {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("missing artifact {path} — run `fsns {producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error(
        "artifact chain broken at {artifact}: stored upstream hash {stored} \
         does not match recomputed {actual}"
    )]
    BrokenChain {
        artifact: String,
        stored: String,
        actual: String,
    },

    #[error("output directory {path} is locked by another run (lock file {lock} exists)")]
    DirectoryLocked { path: PathBuf, lock: PathBuf },

    #[error("benchmark report has no method rows")]
    EmptyReport,

    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to encode or decode JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] fsns_core::CoreError),

    #[error(transparent)]
    Collect(#[from] fsns_collect::CollectError),

    #[error(transparent)]
    Model(#[from] fsns_model::ModelError),
}

pub type Result<T> = std::result::Result<T, BenchError>;
