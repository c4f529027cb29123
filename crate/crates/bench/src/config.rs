//! Pipeline configuration: one TOML document describing the dataset, split,
//! collection run, model, search, baselines, and output location.
//!
//! Every field has a default, so a minimal config needs only a dataset
//! source and an output directory. A master seed can be fanned out across
//! all stage seeds, and the `desk` profile shrinks the run for fast
//! single-core execution.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use fsns_collect::{Channel, CollectorConfig};
use fsns_core::{RedundancyMetric, Task};
use fsns_model::{ModelConfig, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::synth::SynthSpec;

/// Where the dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Load a CSV file with a named label column.
    Path(PathSource),
    /// Generate a seeded synthetic dataset.
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSource {
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    pub task: Task,
}

fn default_label_column() -> String {
    "label".to_string()
}

/// Train/test partitioning of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Exploration-run settings for the triplet-collection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectSettings {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub channel: Channel,
    pub metric: RedundancyMetric,
    /// Shuffled copies added per unique record during corpus augmentation.
    pub copies: usize,
    pub collector: CollectorConfig,
}

impl Default for CollectSettings {
    fn default() -> Self {
        CollectSettings {
            episodes: 300,
            steps_per_episode: 8,
            channel: Channel::Supervised,
            metric: RedundancyMetric::MutualInformation,
            copies: 25,
            collector: CollectorConfig::default(),
        }
    }
}

/// Baseline-comparison settings for the benchmark command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSettings {
    /// Target subset size for K-Best / mRMR / RFE. `None` matches the size
    /// of the pipeline-selected subset.
    pub k: Option<usize>,
    pub rfe_step: usize,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        BaselineSettings { k: None, rfe_step: 1 }
    }
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("fsns-out")
}

/// The complete benchmark pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub collect: CollectSettings,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub baselines: BaselineSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// When false, the model trains with the redundancy head weight zeroed
    /// (performance/reconstruction reweighted to 0.8/0.2) and the search
    /// ignores redundancy entirely (λ = 0).
    #[serde(default = "default_true")]
    pub redundancy: bool,
}

/// Run-size profile applied on top of a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Research-scale defaults; leaves the config untouched.
    Full,
    /// Desk-scale: fewer episodes and epochs, a narrower model, and a
    /// faster learning rate so one seed finishes in minutes on one core.
    Desk,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Full => "full",
            Profile::Desk => "desk",
        })
    }
}

impl FromStr for Profile {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            other => Err(BenchError::UnknownName {
                what: "profile",
                got: other.to_string(),
                expected: "full, desk",
            }),
        }
    }
}

impl PipelineConfig {
    /// Parse a TOML config file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&body).map_err(|e| BenchError::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| BenchError::BadConfig(e.to_string()))
    }

    /// Check every field that later stages assume, including that a
    /// path-sourced dataset actually exists on disk.
    pub fn validate(&self) -> Result<()> {
        match &self.dataset {
            DatasetSource::Path(source) => {
                if !source.path.is_file() {
                    return Err(BenchError::BadConfig(format!(
                        "dataset.path: no file at {}",
                        source.path.display()
                    )));
                }
            }
            DatasetSource::Synthetic(spec) => spec.validate()?,
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(BenchError::BadConfig(format!(
                "split.test_fraction: must lie strictly between 0 and 1, got {}",
                self.split.test_fraction
            )));
        }
        if self.collect.episodes < 1 {
            return Err(BenchError::CountTooSmall {
                what: "collect.episodes",
                min: 1,
                got: self.collect.episodes,
            });
        }
        if self.collect.steps_per_episode < 1 {
            return Err(BenchError::CountTooSmall {
                what: "collect.steps_per_episode",
                min: 1,
                got: self.collect.steps_per_episode,
            });
        }
        if self.baselines.rfe_step < 1 {
            return Err(BenchError::CountTooSmall {
                what: "baselines.rfe_step",
                min: 1,
                got: self.baselines.rfe_step,
            });
        }
        self.model.validate()?;
        self.search.validate()?;
        Ok(())
    }

    /// Fan one master seed out across all stage seeds, keeping stage streams
    /// distinct: split gets `seed`, collection `seed+1`, model `seed+2`,
    /// search `seed+3`.
    pub fn apply_master_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.collect.collector.seed = seed.wrapping_add(1);
        self.collect.collector.evaluation_seed = seed.wrapping_add(1);
        self.model.seed = seed.wrapping_add(2);
        self.search.seed = seed.wrapping_add(3);
    }

    /// Shrink (or keep) the run per the profile.
    pub fn apply_profile(&mut self, profile: Profile) {
        match profile {
            Profile::Full => {}
            Profile::Desk => {
                self.collect.episodes = 50;
                self.collect.steps_per_episode = 6;
                self.collect.copies = 5;
                self.model.pretrain_epochs = 100;
                self.model.finetune_epochs = 40;
                self.model.token_embedding_dim = 32;
                self.model.feedforward_dim = 128;
                self.model.latent_dim = 32;
                self.model.attention_heads = 4;
                self.model.batch_size = 32;
                self.model.learning_rate = 3e-4;
                self.model.evaluator_hidden = 64;
                self.search.max_decode_length = 16;
            }
        }
    }

    /// The model config the pipeline actually trains with: when redundancy
    /// is disabled, the loss weights switch to the redundancy-free preset.
    pub fn effective_model(&self) -> ModelConfig {
        let mut model = self.model.clone();
        if !self.redundancy {
            let preset = ModelConfig::without_redundancy();
            model.performance_weight = preset.performance_weight;
            model.reconstruction_weight = preset.reconstruction_weight;
            model.redundancy_weight = preset.redundancy_weight;
        }
        model
    }

    /// The search config the pipeline actually runs: redundancy disabled
    /// means a zero trade-off in both the ascent and the ranking.
    pub fn effective_search(&self) -> SearchConfig {
        let mut search = self.search.clone();
        if !self.redundancy {
            search.lambda = 0.0;
        }
        search
    }
}
