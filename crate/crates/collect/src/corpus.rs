//! Tokenised training corpus with order-shuffling augmentation.
//!
//! Collection logs are deduplicated to one best-scored record per feature
//! set, mapped into a fixed token vocabulary with reserved padding and
//! sequence markers, and expanded with random permutations of each record so
//! the downstream sequence model sees every subset in many orders while the
//! attached scores stay identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collector::CollectionLog;
use crate::error::{CollectError, Result};

/// Padding token id.
pub const PAD: u32 = 0;
/// Start-of-sequence token id.
pub const SOS: u32 = 1;
/// End-of-sequence token id.
pub const EOS: u32 = 2;
/// First feature token id; feature `i` maps to `i + FEATURE_OFFSET`.
pub const FEATURE_OFFSET: u32 = 3;

/// Bijection between feature indices and token ids at or above
/// [`FEATURE_OFFSET`]; ids below it are reserved specials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub n_features: usize,
}

impl Vocabulary {
    pub fn new(n_features: usize) -> Self {
        Vocabulary { n_features }
    }

    /// Total number of token ids, specials included.
    pub fn size(&self) -> usize {
        self.n_features + FEATURE_OFFSET as usize
    }

    pub fn feature_to_token(&self, feature: usize) -> Result<u32> {
        if feature >= self.n_features {
            return Err(CollectError::FeatureOutOfVocabulary {
                index: feature,
                n_features: self.n_features,
            });
        }
        Ok(feature as u32 + FEATURE_OFFSET)
    }

    /// The feature index behind a token, or `None` for specials and
    /// out-of-range ids.
    pub fn token_to_feature(&self, token: u32) -> Option<usize> {
        if token >= FEATURE_OFFSET && (token as usize) < self.size() {
            Some((token - FEATURE_OFFSET) as usize)
        } else {
            None
        }
    }
}

/// One corpus entry: a feature-token sequence with its two scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub tokens: Vec<u32>,
    pub v: f64,
    pub u: f64,
}

/// The augmented training corpus plus everything needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCorpus {
    pub records: Vec<SubsetRecord>,
    pub vocabulary: Vocabulary,
    /// Fixed sequence length every encoded record is padded to.
    pub max_sequence_length: usize,
    /// Number of shuffled copies added per base record.
    pub augment_copies: usize,
    /// Hex digest of the originating log's record lines.
    pub source_hash: String,
}

/// Sidecar header persisted next to the corpus records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub n_features: usize,
    pub max_len: usize,
    pub augment_copies: usize,
    pub source_hash: String,
}

/// The original record followed by `copies` random permutations of it.
///
/// Permutations are sampled independently (with replacement over orderings),
/// so collisions are possible and every copy carries the base record's exact
/// `(v, u)` pair.
pub fn augment_shuffle(record: &SubsetRecord, copies: usize, seed: u64) -> Vec<SubsetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(copies + 1);
    out.push(record.clone());
    for _ in 0..copies {
        let mut tokens = record.tokens.clone();
        tokens.shuffle(&mut rng);
        out.push(SubsetRecord {
            tokens,
            v: record.v,
            u: record.u,
        });
    }
    out
}

/// Reduce a collection log to unique feature sets and augment each one.
///
/// Records are grouped by sorted index set; within a group the highest-`v`
/// instance wins (ties prefer lower `u`, then the earliest record). Each
/// surviving base record contributes itself plus `copies` shuffles, so the
/// corpus holds exactly `(copies + 1) × unique_sets` records. The sequence
/// length budget is the longest base record plus two marker positions.
pub fn build_corpus(log: &CollectionLog, copies: usize, seed: u64) -> Result<TokenCorpus> {
    if log.records.is_empty() {
        return Err(CollectError::EmptyLog);
    }
    let vocabulary = Vocabulary::new(log.n_features);

    let mut best: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
    for record in &log.records {
        if record.features.is_empty() {
            return Err(CollectError::EmptyRecord);
        }
        let mut key = record.features.clone();
        key.sort_unstable();
        key.dedup();
        if key.len() != record.features.len() {
            return Err(CollectError::CorruptCorpus(format!(
                "log record repeats a feature index: {:?}",
                record.features
            )));
        }
        match best.get_mut(&key) {
            None => {
                best.insert(key, (record.v, record.u));
            }
            Some(existing) => {
                let better = record.v > existing.0
                    || (record.v == existing.0 && record.u < existing.1);
                if better {
                    *existing = (record.v, record.u);
                }
            }
        }
    }

    let longest = best.keys().map(|k| k.len()).max().unwrap_or(0);
    let max_sequence_length = longest + 2;

    let mut records = Vec::with_capacity(best.len() * (copies + 1));
    for (index, (key, &(v, u))) in best.iter().enumerate() {
        let tokens = key
            .iter()
            .map(|&f| vocabulary.feature_to_token(f))
            .collect::<Result<Vec<u32>>>()?;
        let base = SubsetRecord { tokens, v, u };
        let record_seed = seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        records.extend(augment_shuffle(&base, copies, record_seed));
    }

    Ok(TokenCorpus {
        records,
        vocabulary,
        max_sequence_length,
        augment_copies: copies,
        source_hash: hash_log(log),
    })
}

/// Hex SHA-256 of the log's canonical record lines.
pub fn hash_log(log: &CollectionLog) -> String {
    let mut hasher = Sha256::new();
    hasher.update(log.records_string().as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Teacher-forcing layout for one record.
///
/// Returns `(input, target, mask)`, each `max_len` long: the input starts
/// with SOS and the target ends the real tokens with EOS, both padded; the
/// mask is true exactly on non-PAD target positions (the tokens plus EOS).
pub fn encode_sequence(
    record: &SubsetRecord,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(Vec<u32>, Vec<u32>, Vec<bool>)> {
    if record.tokens.is_empty() {
        return Err(CollectError::EmptyRecord);
    }
    for &token in &record.tokens {
        if vocab.token_to_feature(token).is_none() {
            return Err(CollectError::NotAFeatureToken {
                token,
                size: vocab.size(),
            });
        }
    }
    let len = record.tokens.len();
    if len + 2 > max_len {
        return Err(CollectError::SequenceTooLong {
            len,
            needed: len + 2,
            max_len,
        });
    }

    let mut input = Vec::with_capacity(max_len);
    input.push(SOS);
    input.extend_from_slice(&record.tokens);
    input.resize(max_len, PAD);

    let mut target = Vec::with_capacity(max_len);
    target.extend_from_slice(&record.tokens);
    target.push(EOS);
    target.resize(max_len, PAD);

    let mask: Vec<bool> = target.iter().map(|&t| t != PAD).collect();
    Ok((input, target, mask))
}

/// Recover the feature-token sequence from an encoded id sequence.
///
/// Reads up to the first EOS, dropping specials, so it inverts either side of
/// [`encode_sequence`].
pub fn decode_tokens(ids: &[u32]) -> Vec<u32> {
    let mut tokens = Vec::new();
    for &id in ids {
        if id == EOS {
            break;
        }
        if id == PAD || id == SOS {
            continue;
        }
        tokens.push(id);
    }
    tokens
}

impl TokenCorpus {
    /// Write record lines and the sidecar header.
    pub fn save(&self, records_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<()> {
        let records_path = records_path.as_ref();
        let mut lines = String::new();
        for record in &self.records {
            lines.push_str(&serde_json::to_string(record).expect("record serializes"));
            lines.push('\n');
        }
        fs::write(records_path, lines).map_err(|source| CollectError::Io {
            path: records_path.to_path_buf(),
            source,
        })?;

        let header = CorpusHeader {
            n_features: self.vocabulary.n_features,
            max_len: self.max_sequence_length,
            augment_copies: self.augment_copies,
            source_hash: self.source_hash.clone(),
        };
        let header_path = header_path.as_ref();
        fs::write(
            header_path,
            serde_json::to_string_pretty(&header).expect("header serializes"),
        )
        .map_err(|source| CollectError::Io {
            path: header_path.to_path_buf(),
            source,
        })
    }

    /// Reload a corpus saved by [`TokenCorpus::save`].
    pub fn load(records_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<Self> {
        let header_path = header_path.as_ref();
        let header_text = fs::read_to_string(header_path).map_err(|source| CollectError::Io {
            path: header_path.to_path_buf(),
            source,
        })?;
        let header: CorpusHeader = serde_json::from_str(&header_text)?;

        let records_path = records_path.as_ref();
        let text = fs::read_to_string(records_path).map_err(|source| CollectError::Io {
            path: records_path.to_path_buf(),
            source,
        })?;
        let vocabulary = Vocabulary::new(header.n_features);
        let mut records: Vec<SubsetRecord> = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let record: SubsetRecord = serde_json::from_str(line)?;
            if record.tokens.is_empty() {
                return Err(CollectError::EmptyRecord);
            }
            if record.tokens.len() + 2 > header.max_len {
                return Err(CollectError::CorruptCorpus(format!(
                    "record of {} tokens exceeds the declared length budget {}",
                    record.tokens.len(),
                    header.max_len
                )));
            }
            for &token in &record.tokens {
                if vocabulary.token_to_feature(token).is_none() {
                    return Err(CollectError::NotAFeatureToken {
                        token,
                        size: vocabulary.size(),
                    });
                }
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(CollectError::EmptyLog);
        }
        Ok(TokenCorpus {
            records,
            vocabulary,
            max_sequence_length: header.max_len,
            augment_copies: header.augment_copies,
            source_hash: header.source_hash,
        })
    }
}
