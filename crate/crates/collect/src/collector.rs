//! Episode loop that explores feature subsets and logs scored records.
//!
//! One agent per feature decides select/deselect under an annealed
//! exploration rate. The resulting subset is scored either against held-out
//! labels (supervised channel) or by graph locality (unsupervised channel),
//! the score is split among the selecting agents as reward, and every step
//! appends one record of the subset with its performance and redundancy.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use fsns_core::{
    evaluate_subset, normalize_redundancy, split_ab, subset_redundancy, CoreError, DataSplit,
    FeatureSubset, RedundancyMatrix, RedundancyMetric, TabularDataset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Transition, ACTION_SELECT};
use crate::error::{CollectError, Result};
use crate::laplacian::{laplacian_scores, unsupervised_utility};
use crate::state::{encode_state, STATE_DIM};

/// How a candidate subset's performance value is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Model accuracy (or regression score) on an internal validation fold.
    Supervised,
    /// Label-free locality score from the neighbour graph.
    Unsupervised,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Supervised => write!(f, "supervised"),
            Channel::Unsupervised => write!(f, "unsupervised"),
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "supervised" => Ok(Channel::Supervised),
            "unsupervised" => Ok(Channel::Unsupervised),
            other => Err(format!(
                "unknown channel '{other}' (expected supervised or unsupervised)"
            )),
        }
    }
}

/// Tunable knobs for collection other than length and channel.
///
/// Deserialization fills any omitted field from [`CollectorConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectorConfig {
    /// Exploration rate at the first episode.
    pub epsilon_start: f64,
    /// Exploration rate after annealing finishes.
    pub epsilon_end: f64,
    /// Fraction of episodes over which exploration anneals linearly.
    pub anneal_fraction: f64,
    /// Discount on the bootstrapped next-state value.
    pub discount: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Online-to-target network copy interval, in updates.
    pub target_sync_interval: usize,
    pub learning_rate: f64,
    /// Width of both hidden layers in each agent's value network.
    pub hidden_width: usize,
    /// Held-out fraction of the working rows used for supervised scoring.
    pub sub_split_fraction: f64,
    /// Neighbour count for the label-free scoring graph.
    pub k_neighbors: usize,
    /// Seed for the scoring fold and its model fits (kept apart from `seed`
    /// so reruns with different exploration score subsets identically).
    pub evaluation_seed: u64,
    /// Seed for exploration, agent initialisation, and replay sampling.
    pub seed: u64,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        CollectorConfig {
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            anneal_fraction: 0.6,
            discount: 0.9,
            replay_capacity: 5000,
            batch_size: 32,
            target_sync_interval: 50,
            learning_rate: 1e-3,
            hidden_width: 64,
            sub_split_fraction: 0.2,
            k_neighbors: 5,
            evaluation_seed: 101,
            seed: 0,
        }
    }
}

/// One scored subset visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Selected feature indices in ascending order.
    pub features: Vec<usize>,
    /// Performance value from the active channel.
    pub v: f64,
    /// Normalised subset redundancy in `[0, 1]`.
    pub u: f64,
    pub channel: Channel,
}

/// Everything one collection run produced, in visit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionLog {
    pub n_features: usize,
    pub episodes: usize,
    pub channel: Channel,
    pub redundancy_metric: RedundancyMetric,
    pub records: Vec<LogRecord>,
}

impl CollectionLog {
    /// The records as line-delimited JSON, one record per line.
    ///
    /// This exact string is what [`CollectionLog::save`] writes to the
    /// records file, so hashes of the two always agree.
    pub fn records_string(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Write the records file (line-delimited JSON) plus a small metadata
    /// sidecar holding the fields that individual lines do not carry.
    pub fn save(&self, records_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
        let records_path = records_path.as_ref();
        fs::write(records_path, self.records_string()).map_err(|source| CollectError::Io {
            path: records_path.to_path_buf(),
            source,
        })?;
        let meta = LogMeta {
            n_features: self.n_features,
            episodes: self.episodes,
            channel: self.channel,
            redundancy_metric: self.redundancy_metric,
        };
        let meta_path = meta_path.as_ref();
        fs::write(
            meta_path,
            serde_json::to_string_pretty(&meta).expect("meta serializes"),
        )
        .map_err(|source| CollectError::Io {
            path: meta_path.to_path_buf(),
            source,
        })
    }

    /// Reload a log saved by [`CollectionLog::save`].
    pub fn load(records_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Self> {
        let meta_path = meta_path.as_ref();
        let meta_text = fs::read_to_string(meta_path).map_err(|source| CollectError::Io {
            path: meta_path.to_path_buf(),
            source,
        })?;
        let meta: LogMeta = serde_json::from_str(&meta_text)?;

        let records_path = records_path.as_ref();
        let text = fs::read_to_string(records_path).map_err(|source| CollectError::Io {
            path: records_path.to_path_buf(),
            source,
        })?;
        let mut records = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line)?);
        }
        Ok(CollectionLog {
            n_features: meta.n_features,
            episodes: meta.episodes,
            channel: meta.channel,
            redundancy_metric: meta.redundancy_metric,
            records,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LogMeta {
    n_features: usize,
    episodes: usize,
    channel: Channel,
    redundancy_metric: RedundancyMetric,
}

/// Split a utility equally across the agents that chose select.
///
/// Non-selecting agents receive exactly 0. The last selector's share absorbs
/// the floating-point residue, so summing the returned rewards left to right
/// reproduces `utility` bit-for-bit whenever at least one agent selected.
pub fn split_reward(utility: f64, actions: &[usize]) -> Vec<f64> {
    let selectors: Vec<usize> = actions
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == ACTION_SELECT)
        .map(|(i, _)| i)
        .collect();
    let mut rewards = vec![0.0; actions.len()];
    let n = selectors.len();
    if n == 0 {
        return rewards;
    }
    let share = utility / n as f64;
    let mut allocated = 0.0;
    for &agent in selectors.iter().take(n - 1) {
        rewards[agent] = share;
        allocated += share;
    }
    rewards[selectors[n - 1]] = utility - allocated;
    rewards
}

/// Run multi-agent subset exploration and return the visit log.
///
/// Works entirely on the rows named by `split`'s train side: supervised
/// scoring holds out an internal validation fold of those rows, and
/// label-free scoring builds its neighbour graph on them. Each episode starts
/// from the empty subset; per step every agent picks an action ε-greedily, an
/// empty outcome is replaced by one uniformly random feature (scored but
/// unrewarded), the configured channel scores the subset, selecting agents
/// split the score as reward, and every agent stores its transition and takes
/// one replay update. Identical inputs produce identical logs.
pub fn run_collection(
    dataset: &TabularDataset,
    split: &DataSplit,
    episodes: usize,
    steps_per_episode: usize,
    channel: Channel,
    redundancy_matrix: &RedundancyMatrix,
    config: &CollectorConfig,
) -> Result<CollectionLog> {
    if episodes == 0 {
        return Err(CollectError::NoEpisodes);
    }
    if steps_per_episode == 0 {
        return Err(CollectError::NoSteps);
    }
    let n_features = dataset.n_features();
    if redundancy_matrix.n_features != n_features {
        return Err(CoreError::LengthMismatch {
            left: redundancy_matrix.n_features,
            right: n_features,
        }
        .into());
    }
    if !(0.0..=1.0).contains(&config.epsilon_start)
        || !(0.0..=1.0).contains(&config.epsilon_end)
        || config.epsilon_end > config.epsilon_start
    {
        return Err(CollectError::BadEpsilonSchedule {
            start: config.epsilon_start,
            end: config.epsilon_end,
        });
    }

    let working = dataset.subset_rows(&split.train_indices)?;
    let mut scorer = SubsetScorer::new(&working, channel, config)?;

    let full_raw = subset_redundancy(redundancy_matrix, &FeatureSubset::full(n_features))?;
    let redundancy_of = |subset: &FeatureSubset| -> Result<f64> {
        let raw = subset_redundancy(redundancy_matrix, subset)?;
        Ok(normalize_redundancy(raw, full_raw)?)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut agents: Vec<Agent> = (0..n_features)
        .map(|_| {
            Agent::new(
                config.hidden_width,
                config.learning_rate,
                config.replay_capacity,
                config.target_sync_interval,
                &mut rng,
            )
        })
        .collect();

    let anneal_episodes =
        ((config.anneal_fraction * episodes as f64).ceil() as usize).min(episodes);

    let mut records = Vec::with_capacity(episodes * steps_per_episode);
    for episode in 0..episodes {
        let epsilon = if anneal_episodes == 0 {
            config.epsilon_end
        } else {
            let progress = (episode as f64 / anneal_episodes as f64).min(1.0);
            config.epsilon_start + (config.epsilon_end - config.epsilon_start) * progress
        };

        let mut state = vec![0.0; STATE_DIM];
        for _ in 0..steps_per_episode {
            // Every agent always consumes the exploration roll, so the random
            // stream (and hence the subsets visited) is identical across
            // channels whenever exploration never consults the networks.
            let actions: Vec<usize> = (0..n_features)
                .map(|i| {
                    let roll: f64 = rng.gen();
                    if roll < epsilon {
                        rng.gen_range(0..crate::agent::N_ACTIONS)
                    } else {
                        agents[i].greedy_action(&state)
                    }
                })
                .collect();

            let selected: Vec<usize> = (0..n_features)
                .filter(|&i| actions[i] == ACTION_SELECT)
                .collect();
            let (members, rewarded) = if selected.is_empty() {
                (vec![rng.gen_range(0..n_features)], false)
            } else {
                (selected, true)
            };
            let subset = FeatureSubset::new(members).expect("indices are distinct and in range");

            let v = scorer.score(&subset)?;
            let u = redundancy_of(&subset)?;
            let rewards = if rewarded {
                split_reward(v, &actions)
            } else {
                vec![0.0; n_features]
            };

            let next_state = encode_state(&working, &subset);
            for i in 0..n_features {
                agents[i].remember(Transition {
                    state: state.clone(),
                    action: actions[i],
                    reward: rewards[i],
                    next_state: next_state.clone(),
                });
            }
            for agent in agents.iter_mut() {
                agent.train_step(config.batch_size, config.discount, &mut rng);
            }

            records.push(LogRecord {
                features: subset.sorted_indices(),
                v,
                u,
                channel,
            });
            state = next_state;
        }
    }

    Ok(CollectionLog {
        n_features,
        episodes,
        channel,
        redundancy_metric: redundancy_matrix.metric,
        records,
    })
}

/// Channel-specific subset scoring with memoisation for the expensive case.
struct SubsetScorer<'a> {
    working: &'a TabularDataset,
    channel: Channel,
    evaluation_seed: u64,
    fold: Option<DataSplit>,
    graph_scores: Option<Vec<f64>>,
    cache: BTreeMap<Vec<usize>, f64>,
}

impl<'a> SubsetScorer<'a> {
    fn new(working: &'a TabularDataset, channel: Channel, config: &CollectorConfig) -> Result<Self> {
        let (fold, graph_scores) = match channel {
            Channel::Supervised => (
                Some(split_ab(
                    working,
                    config.sub_split_fraction,
                    config.evaluation_seed,
                )?),
                None,
            ),
            Channel::Unsupervised => (
                None,
                Some(laplacian_scores(working, config.k_neighbors, None)?),
            ),
        };
        Ok(SubsetScorer {
            working,
            channel,
            evaluation_seed: config.evaluation_seed,
            fold,
            graph_scores,
            cache: BTreeMap::new(),
        })
    }

    fn score(&mut self, subset: &FeatureSubset) -> Result<f64> {
        let key = subset.sorted_indices();
        if let Some(&hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let value = match self.channel {
            Channel::Supervised => evaluate_subset(
                self.working,
                self.fold.as_ref().expect("fold exists for supervised"),
                subset,
                self.evaluation_seed,
            )?,
            Channel::Unsupervised => unsupervised_utility(
                self.graph_scores.as_ref().expect("scores exist"),
                subset,
            )?,
        };
        self.cache.insert(key, value);
        Ok(value)
    }
}
