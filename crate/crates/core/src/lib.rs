//! Tabular foundations for feature-selection experiments: dataset
//! ingestion, deterministic A/B splits, random-forest subset scoring, and
//! pairwise redundancy metrics.
//!
//! Everything downstream (subset collection, embedding models, search,
//! baselines) builds on the guarantees made here: fixed seeds produce
//! bit-identical splits, forests, and scores.

pub mod dataset;
mod error;
pub mod evaluate;
pub mod forest;
pub mod redundancy;
pub mod split;
pub mod subset;

pub use dataset::{TabularDataset, Task, MIN_FEATURES, MIN_SAMPLES};
pub use error::{CoreError, Result};
pub use evaluate::{brute_force_best_subset, evaluate_subset, MAX_ENUMERATED_FEATURES};
pub use forest::{ForestConfig, RandomForest, DEFAULT_N_TREES};
pub use redundancy::{
    build_matrix, covariance_abs, default_bins, matrix_as_array, mutual_information,
    normalize_redundancy, pearson_abs, subset_redundancy, RedundancyMatrix, RedundancyMetric,
};
pub use split::{split_ab, DataSplit};
pub use subset::FeatureSubset;
