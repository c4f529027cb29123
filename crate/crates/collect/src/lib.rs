//! Exploration-driven collection of scored feature subsets and their
//! conversion into a tokenised training corpus.
//!
//! One value-learning agent per feature jointly proposes subsets, each
//! proposal is scored for performance (against held-out labels or by graph
//! locality) and redundancy, and every visit is logged. Logs deduplicate into
//! a shuffle-augmented token corpus ready for sequence-model training.

pub mod agent;
pub mod collector;
pub mod corpus;
pub mod error;
pub mod laplacian;
pub mod state;

pub use agent::{bellman_target, Agent, Transition, ACTION_DESELECT, ACTION_SELECT, N_ACTIONS};
pub use collector::{
    run_collection, split_reward, Channel, CollectionLog, CollectorConfig, LogRecord,
};
pub use corpus::{
    augment_shuffle, build_corpus, decode_tokens, encode_sequence, hash_log, CorpusHeader,
    SubsetRecord, TokenCorpus, Vocabulary, EOS, FEATURE_OFFSET, PAD, SOS,
};
pub use error::{CollectError, Result};
pub use laplacian::{laplacian_scores, unsupervised_utility, DEFAULT_NEIGHBORS};
pub use state::{encode_state, summary_stats, STATE_DIM, STATS_PER_PASS};
