//! Two-stage training loop over a token corpus.
//!
//! The first stage trains reconstruction and both score heads with the
//! latent-regularization weight forced to zero, letting the embedding space
//! organize before being pulled toward the prior; the second stage restores
//! the configured weight. Every epoch shuffles the corpus, averages gradients
//! over mini-batches, applies one optimizer step per batch, and (optionally)
//! overwrites a rolling checkpoint.

use std::collections::BTreeMap;
use std::path::Path;

use fsns_collect::TokenCorpus;
use fsns_nn::Adam;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::error::{ModelError, Result};
use crate::model::{EncodedRecord, SubsetEmbeddingModel};

/// Which of the two optimization stages an epoch belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStage {
    Pretrain,
    Finetune,
}

/// Mean loss components over one epoch.
///
/// `kl` always reports the regularizer's value, even in the first stage
/// where its weight is zero and it does not contribute to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub stage: TrainStage,
    pub total: f64,
    pub performance: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub redundancy: f64,
}

/// Full per-epoch loss history of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
}

/// Train `model` on `corpus` in place.
///
/// When `checkpoint_path` is given the model is saved there after every
/// epoch, overwriting the previous save. Returns the per-epoch loss history;
/// fails with [`ModelError::Diverged`] as soon as an epoch's mean total loss
/// is not finite.
pub fn train(
    model: &mut SubsetEmbeddingModel,
    corpus: &TokenCorpus,
    checkpoint_path: Option<&Path>,
) -> Result<TrainReport> {
    if corpus.records.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut records: Vec<EncodedRecord> = corpus
        .records
        .iter()
        .map(|record| EncodedRecord::from_record(record, &corpus.vocabulary, model.max_positions))
        .collect::<Result<_>>()?;

    let config = model.config.clone();
    let latent_dim = config.latent_dim;
    let batch_size = config.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Adam::new(config.learning_rate, config.clip_norm);

    let stages = [
        (TrainStage::Pretrain, config.pretrain_epochs, 0.0),
        (TrainStage::Finetune, config.finetune_epochs, config.kl_weight),
    ];
    let mut history = Vec::with_capacity(config.pretrain_epochs + config.finetune_epochs);
    let mut epoch = 0usize;

    for (stage, n_epochs, kl_weight) in stages {
        for _ in 0..n_epochs {
            epoch += 1;
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.shuffle(&mut rng);

            let mut sum_total = 0.0;
            let mut sum_performance = 0.0;
            let mut sum_reconstruction = 0.0;
            let mut sum_kl = 0.0;
            let mut sum_redundancy = 0.0;

            for chunk in order.chunks(batch_size) {
                let mut grad_sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for &index in chunk {
                    let noise: Vec<f64> =
                        (0..latent_dim).map(|_| rng.sample(StandardNormal)).collect();
                    records[index].noise = Some(noise);
                    let (parts, grads) = model.record_loss(&records[index], kl_weight, true)?;
                    sum_total += parts.total;
                    sum_performance += parts.performance;
                    sum_reconstruction += parts.reconstruction;
                    sum_kl += parts.kl;
                    sum_redundancy += parts.redundancy;
                    for (name, grad) in grads.expect("gradients were requested") {
                        match grad_sums.get_mut(&name) {
                            Some(acc) => {
                                for (a, g) in acc.iter_mut().zip(&grad) {
                                    *a += g;
                                }
                            }
                            None => {
                                grad_sums.insert(name, grad);
                            }
                        }
                    }
                }
                let scale = 1.0 / chunk.len() as f64;
                for grad in grad_sums.values_mut() {
                    for value in grad.iter_mut() {
                        *value *= scale;
                    }
                }
                optimizer.step(&mut model.params_mut(), &grad_sums);
            }

            let n = records.len() as f64;
            let entry = EpochLoss {
                epoch,
                stage,
                total: sum_total / n,
                performance: sum_performance / n,
                reconstruction: sum_reconstruction / n,
                kl: sum_kl / n,
                redundancy: sum_redundancy / n,
            };
            if !entry.total.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    total: entry.total,
                });
            }
            if let Some(path) = checkpoint_path {
                save_checkpoint(model, path)?;
            }
            history.push(entry);
        }
    }
    Ok(TrainReport { history })
}
