//! Variational sequence model over feature subsets.
//!
//! This crate turns a collected token corpus into a searchable embedding
//! space:
//!
//! - [`SubsetEmbeddingModel`] — transformer encoder/decoder with a
//!   reparameterized latent bottleneck and two score heads predicting a
//!   subset's performance and redundancy from its embedding.
//! - [`train`] — two-stage optimization (regularizer off, then on) with
//!   per-epoch loss history and rolling checkpoints.
//! - [`save_checkpoint`] / [`load_checkpoint`] — bit-exact JSON persistence.
//! - [`search`] — multi-start gradient ascent in the latent space followed
//!   by constrained greedy decoding back to a concrete feature subset.

mod checkpoint;
mod config;
mod error;
mod model;
mod search;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT};
pub use config::{KlForm, ModelConfig};
pub use error::{ModelError, Result};
pub use model::{
    weighted_total, EncodedRecord, LatentEncoding, LossBreakdown, SubsetEmbeddingModel,
};
pub use search::{
    decode_subset, gradient_ascend, rank_candidates, search, select_starts, Candidate, HeadEval,
    ScoreHeads, SearchConfig, SearchResult, SearchStart, StartFailure, TrajectoryPoint,
};
pub use train::{train, EpochLoss, TrainReport, TrainStage};
