//! The subset sequence model: variational encoder, autoregressive decoder,
//! and two scalar score heads over a shared latent space.
//!
//! The encoder self-attends over a subset's feature tokens, mean-pools the
//! real positions, and emits a mean and log-scale pair from which a smoothed
//! latent is sampled by reparameterization. The decoder regenerates the token
//! sequence autoregressively conditioned on that latent, and two small
//! feed-forward heads predict the subset's performance and redundancy from
//! the latent alone.

use std::collections::BTreeMap;

use fsns_collect::{SubsetRecord, Vocabulary, SOS};
use fsns_nn::init::xavier_uniform;
use fsns_nn::{sinusoidal_positions, Graph, Linear, Mlp, Param, Tensor, VarId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{KlForm, ModelConfig};
use crate::error::{ModelError, Result};

const NORM_EPS: f64 = 1e-5;
const MASKED_SCORE: f64 = -1e30;
/// Initial log-scale head bias: starts latent noise at exp(-3) of unit scale
/// so early training is dominated by the means.
const LOG_SCALE_BIAS_INIT: f64 = -3.0;

/// Variational encoding of one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentEncoding {
    pub mean: Vec<f64>,
    pub log_scale: Vec<f64>,
    /// `mean + noise * exp(log_scale)`; equals `mean` when encoding ran
    /// without noise.
    pub sample: Vec<f64>,
}

/// Per-record loss components; `total` is the weighted combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub performance: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub redundancy: f64,
}

/// Weighted combination of the four loss components under a config's
/// weights.
pub fn weighted_total(
    config: &ModelConfig,
    performance: f64,
    reconstruction: f64,
    kl: f64,
    redundancy: f64,
) -> f64 {
    config.performance_weight * performance
        + config.reconstruction_weight * reconstruction
        + config.kl_weight * kl
        + config.redundancy_weight * redundancy
}

/// One corpus record prepared for the model: trimmed token ids plus targets.
///
/// All sequences hold only real positions (padding is dropped up front):
/// `decoder_input` is the tokens right-shifted behind a start marker and
/// `targets` is the tokens followed by the end marker, so the two always have
/// equal length and position `i` of the decoder predicts `targets[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRecord {
    pub encoder_tokens: Vec<usize>,
    pub decoder_input: Vec<usize>,
    pub targets: Vec<usize>,
    pub v: f64,
    pub u: f64,
    /// Reparameterization noise for this pass; `None` encodes at the mean.
    pub noise: Option<Vec<f64>>,
}

impl EncodedRecord {
    pub fn from_record(
        record: &SubsetRecord,
        vocab: &Vocabulary,
        max_positions: usize,
    ) -> Result<Self> {
        if record.tokens.is_empty() {
            return Err(fsns_collect::CollectError::EmptyRecord.into());
        }
        for &token in &record.tokens {
            if vocab.token_to_feature(token).is_none() {
                return Err(ModelError::TokenOutOfVocabulary {
                    token,
                    vocab_size: vocab.size(),
                });
            }
        }
        let len = record.tokens.len();
        if len + 1 > max_positions {
            return Err(ModelError::SequenceTooLong {
                len: len + 1,
                max: max_positions,
            });
        }
        let tokens: Vec<usize> = record.tokens.iter().map(|&t| t as usize).collect();
        let mut decoder_input = Vec::with_capacity(len + 1);
        decoder_input.push(SOS as usize);
        decoder_input.extend_from_slice(&tokens);
        let mut targets = tokens.clone();
        targets.push(fsns_collect::EOS as usize);
        Ok(EncodedRecord {
            encoder_tokens: tokens,
            decoder_input,
            targets,
            v: record.v,
            u: record.u,
            noise: None,
        })
    }
}

/// Post-norm self-attention block: multi-head attention and a feed-forward
/// expansion, each followed by a residual connection and layer norm.
pub(crate) struct TransformerBlock {
    query: Linear,
    key: Linear,
    value: Linear,
    output: Linear,
    norm1_gamma: Param,
    norm1_beta: Param,
    ff1: Linear,
    ff2: Linear,
    norm2_gamma: Param,
    norm2_beta: Param,
    heads: usize,
    head_dim: usize,
}

impl TransformerBlock {
    fn new(name: &str, dim: usize, heads: usize, ff_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        TransformerBlock {
            query: Linear::new(&format!("{name}.query"), dim, dim, rng),
            key: Linear::new(&format!("{name}.key"), dim, dim, rng),
            value: Linear::new(&format!("{name}.value"), dim, dim, rng),
            output: Linear::new(&format!("{name}.output"), dim, dim, rng),
            norm1_gamma: Param::new(format!("{name}.norm1.gamma"), Tensor::filled(1, dim, 1.0)),
            norm1_beta: Param::new(format!("{name}.norm1.beta"), Tensor::zeros(1, dim)),
            ff1: Linear::new(&format!("{name}.ff1"), dim, ff_dim, rng),
            ff2: Linear::new(&format!("{name}.ff2"), ff_dim, dim, rng),
            norm2_gamma: Param::new(format!("{name}.norm2.gamma"), Tensor::filled(1, dim, 1.0)),
            norm2_beta: Param::new(format!("{name}.norm2.beta"), Tensor::zeros(1, dim)),
            heads,
            head_dim: dim / heads,
        }
    }

    fn forward(&self, g: &mut Graph, x: VarId, causal: Option<&Tensor>) -> VarId {
        let q = self.query.forward(g, x);
        let k = self.key.forward(g, x);
        let v = self.value.forward(g, x);
        let mask = causal.map(|m| g.constant(m.clone()));
        let scale = 1.0 / (self.head_dim as f64).sqrt();

        let mut contexts = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let offset = h * self.head_dim;
            let qh = g.slice_cols(q, offset, self.head_dim);
            let kh = g.slice_cols(k, offset, self.head_dim);
            let vh = g.slice_cols(v, offset, self.head_dim);
            let kt = g.transpose(kh);
            let raw = g.matmul(qh, kt);
            let mut scores = g.scale(raw, scale);
            if let Some(m) = mask {
                scores = g.add(scores, m);
            }
            let attention = g.softmax_rows(scores);
            contexts.push(g.matmul(attention, vh));
        }
        let merged = g.concat_cols(&contexts);
        let projected = self.output.forward(g, merged);
        let residual = g.add(x, projected);
        let gamma1 = g.param(&self.norm1_gamma);
        let beta1 = g.param(&self.norm1_beta);
        let normed = g.layer_norm(residual, gamma1, beta1, NORM_EPS);

        let hidden = self.ff1.forward(g, normed);
        let hidden = g.relu(hidden);
        let expanded = self.ff2.forward(g, hidden);
        let residual2 = g.add(normed, expanded);
        let gamma2 = g.param(&self.norm2_gamma);
        let beta2 = g.param(&self.norm2_beta);
        g.layer_norm(residual2, gamma2, beta2, NORM_EPS)
    }

    fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for linear in [&self.query, &self.key, &self.value, &self.output, &self.ff1, &self.ff2] {
            out.extend(linear.params());
        }
        out.push(&self.norm1_gamma);
        out.push(&self.norm1_beta);
        out.push(&self.norm2_gamma);
        out.push(&self.norm2_beta);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for linear in [
            &mut self.query,
            &mut self.key,
            &mut self.value,
            &mut self.output,
            &mut self.ff1,
            &mut self.ff2,
        ] {
            out.extend(linear.params_mut());
        }
        out.push(&mut self.norm1_gamma);
        out.push(&mut self.norm1_beta);
        out.push(&mut self.norm2_gamma);
        out.push(&mut self.norm2_beta);
        out
    }
}

/// Encoder, decoder, and score heads sharing one latent space.
pub struct SubsetEmbeddingModel {
    pub config: ModelConfig,
    pub n_features: usize,
    /// Longest sequence (in real positions) either stack can process.
    pub max_positions: usize,
    vocab_size: usize,
    positions: Tensor,
    enc_embedding: Param,
    enc_blocks: Vec<TransformerBlock>,
    head_mean: Linear,
    head_log_scale: Linear,
    dec_embedding: Param,
    latent_proj: Linear,
    dec_blocks: Vec<TransformerBlock>,
    output_proj: Linear,
    performance_head: Mlp,
    redundancy_head: Mlp,
}

impl SubsetEmbeddingModel {
    /// Build a freshly initialized model for `n_features` feature tokens.
    pub fn new(config: ModelConfig, n_features: usize, max_positions: usize) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(ModelError::NonPositiveDimension { what: "n_features" });
        }
        if max_positions < 2 {
            return Err(ModelError::NonPositiveDimension {
                what: "max_positions",
            });
        }
        let vocab_size = Vocabulary::new(n_features).size();
        let dim = config.token_embedding_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let enc_embedding = Param::new(
            "encoder.embedding",
            xavier_uniform(vocab_size, dim, &mut rng),
        );
        let enc_blocks = (0..config.encoder_layers)
            .map(|i| {
                TransformerBlock::new(
                    &format!("encoder.block{i}"),
                    dim,
                    config.attention_heads,
                    config.feedforward_dim,
                    &mut rng,
                )
            })
            .collect();
        let head_mean = Linear::new("encoder.mean", dim, config.latent_dim, &mut rng);
        let mut head_log_scale = Linear::new("encoder.log_scale", dim, config.latent_dim, &mut rng);
        head_log_scale.bias.tensor = Tensor::filled(1, config.latent_dim, LOG_SCALE_BIAS_INIT);

        let dec_embedding = Param::new(
            "decoder.embedding",
            xavier_uniform(vocab_size, dim, &mut rng),
        );
        let latent_proj = Linear::new("decoder.latent", config.latent_dim, dim, &mut rng);
        let dec_blocks = (0..config.decoder_layers)
            .map(|i| {
                TransformerBlock::new(
                    &format!("decoder.block{i}"),
                    dim,
                    config.attention_heads,
                    config.feedforward_dim,
                    &mut rng,
                )
            })
            .collect();
        let output_proj = Linear::new("decoder.out", dim, vocab_size, &mut rng);

        let head_dims = [
            config.latent_dim,
            config.evaluator_hidden,
            config.evaluator_hidden,
            1,
        ];
        let performance_head = Mlp::new("performance", &head_dims, &mut rng);
        let redundancy_head = Mlp::new("redundancy", &head_dims, &mut rng);

        Ok(SubsetEmbeddingModel {
            positions: sinusoidal_positions(max_positions, dim),
            config,
            n_features,
            max_positions,
            vocab_size,
            enc_embedding,
            enc_blocks,
            head_mean,
            head_log_scale,
            dec_embedding,
            latent_proj,
            dec_blocks,
            output_proj,
            performance_head,
            redundancy_head,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.n_features)
    }

    /// All parameter tensors in a fixed order.
    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.enc_embedding];
        for block in &self.enc_blocks {
            out.extend(block.params());
        }
        out.extend(self.head_mean.params());
        out.extend(self.head_log_scale.params());
        out.push(&self.dec_embedding);
        out.extend(self.latent_proj.params());
        for block in &self.dec_blocks {
            out.extend(block.params());
        }
        out.extend(self.output_proj.params());
        out.extend(self.performance_head.params());
        out.extend(self.redundancy_head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.enc_embedding];
        for block in &mut self.enc_blocks {
            out.extend(block.params_mut());
        }
        out.extend(self.head_mean.params_mut());
        out.extend(self.head_log_scale.params_mut());
        out.push(&mut self.dec_embedding);
        out.extend(self.latent_proj.params_mut());
        for block in &mut self.dec_blocks {
            out.extend(block.params_mut());
        }
        out.extend(self.output_proj.params_mut());
        out.extend(self.performance_head.params_mut());
        out.extend(self.redundancy_head.params_mut());
        out
    }

    fn position_slice(&self, len: usize) -> Tensor {
        let dim = self.config.token_embedding_dim;
        Tensor::from_vec(len, dim, self.positions.as_slice()[..len * dim].to_vec())
    }

    fn check_latent(&self, latent: &[f64]) -> Result<()> {
        if latent.len() != self.config.latent_dim {
            return Err(ModelError::LatentDimMismatch {
                got: latent.len(),
                want: self.config.latent_dim,
            });
        }
        Ok(())
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        for &token in tokens {
            if token >= self.vocab_size {
                return Err(ModelError::TokenOutOfVocabulary {
                    token: token as u32,
                    vocab_size: self.vocab_size,
                });
            }
        }
        if tokens.is_empty() {
            return Err(ModelError::NoRealPositions);
        }
        if tokens.len() > self.max_positions {
            return Err(ModelError::SequenceTooLong {
                len: tokens.len(),
                max: self.max_positions,
            });
        }
        Ok(())
    }

    /// Encoder forward over real positions only: returns the mean and
    /// log-scale variables.
    pub(crate) fn encoder_latents(&self, g: &mut Graph, tokens: &[usize]) -> (VarId, VarId) {
        let table = g.param(&self.enc_embedding);
        let embedded = g.gather_rows(table, tokens);
        let pos = g.constant(self.position_slice(tokens.len()));
        let mut x = g.add(embedded, pos);
        for block in &self.enc_blocks {
            x = block.forward(g, x, None);
        }
        let pooled = g.mean_rows(x);
        let mean = self.head_mean.forward(g, pooled);
        let log_scale = self.head_log_scale.forward(g, pooled);
        (mean, log_scale)
    }

    /// Decoder forward over a real-position prefix conditioned on a latent
    /// variable: returns per-position logits over the vocabulary.
    pub(crate) fn decoder_logits(&self, g: &mut Graph, tokens: &[usize], latent: VarId) -> VarId {
        let table = g.param(&self.dec_embedding);
        let embedded = g.gather_rows(table, tokens);
        let pos = g.constant(self.position_slice(tokens.len()));
        let with_pos = g.add(embedded, pos);
        let conditioning = self.latent_proj.forward(g, latent);
        let mut x = g.add_row(with_pos, conditioning);
        let causal = causal_mask(tokens.len());
        for block in &self.dec_blocks {
            x = block.forward(g, x, Some(&causal));
        }
        self.output_proj.forward(g, x)
    }

    /// Encode a padded token sequence into a latent.
    ///
    /// Only positions where `mask` is true participate in attention and
    /// pooling, so trailing padding never influences the result. With
    /// `noise = None` the sample equals the mean (the deterministic mode);
    /// passing a noise vector applies the reparameterized sample
    /// `mean + noise * exp(log_scale)`.
    pub fn encode(
        &self,
        ids: &[u32],
        mask: &[bool],
        noise: Option<&[f64]>,
    ) -> Result<LatentEncoding> {
        if ids.len() != mask.len() {
            return Err(ModelError::MaskMismatch {
                ids: ids.len(),
                mask: mask.len(),
            });
        }
        let mut tokens = Vec::new();
        for (&id, &keep) in ids.iter().zip(mask) {
            if !keep {
                continue;
            }
            if id as usize >= self.vocab_size {
                return Err(ModelError::TokenOutOfVocabulary {
                    token: id,
                    vocab_size: self.vocab_size,
                });
            }
            tokens.push(id as usize);
        }
        self.check_tokens(&tokens)?;
        if let Some(eps) = noise {
            if eps.len() != self.config.latent_dim {
                return Err(ModelError::NoiseDimMismatch {
                    got: eps.len(),
                    want: self.config.latent_dim,
                });
            }
        }

        let mut g = Graph::new();
        let (mean, log_scale) = self.encoder_latents(&mut g, &tokens);
        let sample = match noise {
            None => mean,
            Some(eps) => {
                let eps_var = g.constant(Tensor::row(eps.to_vec()));
                let scale = g.exp(log_scale);
                let scaled = g.mul(eps_var, scale);
                g.add(mean, scaled)
            }
        };
        Ok(LatentEncoding {
            mean: g.value(mean).as_slice().to_vec(),
            log_scale: g.value(log_scale).as_slice().to_vec(),
            sample: g.value(sample).as_slice().to_vec(),
        })
    }

    /// Next-token distribution given a latent and a prefix starting with the
    /// start marker. The returned vector sums to 1 over the vocabulary.
    pub fn decode_step(&self, latent: &[f64], prefix: &[u32]) -> Result<Vec<f64>> {
        self.check_latent(latent)?;
        if prefix.first() != Some(&SOS) {
            return Err(ModelError::PrefixMissingStart);
        }
        let tokens: Vec<usize> = prefix.iter().map(|&t| t as usize).collect();
        self.check_tokens(&tokens)?;

        let mut g = Graph::new();
        let latent_var = g.constant(Tensor::row(latent.to_vec()));
        let logits = self.decoder_logits(&mut g, &tokens, latent_var);
        let probs = g.softmax_rows(logits);
        let values = g.value(probs);
        let last = tokens.len() - 1;
        Ok(values.as_slice()[last * self.vocab_size..(last + 1) * self.vocab_size].to_vec())
    }

    /// Teacher-forced log-likelihood of a target sequence under a latent:
    /// the sum of next-token log-probabilities over unmasked positions.
    /// Always at most 0.
    pub fn sequence_log_likelihood(
        &self,
        latent: &[f64],
        targets: &[u32],
        mask: &[bool],
    ) -> Result<f64> {
        self.check_latent(latent)?;
        if targets.len() != mask.len() {
            return Err(ModelError::MaskMismatch {
                ids: targets.len(),
                mask: mask.len(),
            });
        }
        let real: Vec<usize> = targets
            .iter()
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|(&t, _)| t as usize)
            .collect();
        self.check_tokens(&real)?;
        let mut input = Vec::with_capacity(real.len());
        input.push(SOS as usize);
        input.extend_from_slice(&real[..real.len() - 1]);

        let mut g = Graph::new();
        let latent_var = g.constant(Tensor::row(latent.to_vec()));
        let logits = self.decoder_logits(&mut g, &input, latent_var);
        let log_probs = g.log_softmax_rows(logits);
        let picked = g.select_per_row(log_probs, &real);
        let total = g.sum_all(picked);
        Ok(g.value(total).item())
    }

    /// Evaluate both score heads on a latent vector: `(v_hat, u_hat)`.
    pub fn predict_scores(&self, latent: &[f64]) -> Result<(f64, f64)> {
        self.check_latent(latent)?;
        let mut g = Graph::new();
        let input = g.constant(Tensor::row(latent.to_vec()));
        let v = self.performance_head.forward(&mut g, input);
        let u = self.redundancy_head.forward(&mut g, input);
        Ok((g.value(v).item(), g.value(u).item()))
    }

    /// Both heads and their gradients with respect to the latent input:
    /// `(v_hat, u_hat, dv/dlatent, du/dlatent)`.
    pub fn scores_with_gradients(
        &self,
        latent: &[f64],
    ) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        self.check_latent(latent)?;
        let mut g = Graph::new();
        let input = g.input(Tensor::row(latent.to_vec()));
        let v = self.performance_head.forward(&mut g, input);
        let u = self.redundancy_head.forward(&mut g, input);
        let v_grads = g.backward(v);
        let u_grads = g.backward(u);
        let dv = v_grads.get(input).expect("input participates").to_vec();
        let du = u_grads.get(input).expect("input participates").to_vec();
        Ok((g.value(v).item(), g.value(u).item(), dv, du))
    }

    /// Full joint loss of one record, optionally with parameter gradients.
    ///
    /// `kl_weight` is passed explicitly so the training schedule can zero it
    /// in the first stage while still reporting the component's value.
    pub fn record_loss(
        &self,
        record: &EncodedRecord,
        kl_weight: f64,
        collect_grads: bool,
    ) -> Result<(LossBreakdown, Option<BTreeMap<String, Vec<f64>>>)> {
        self.check_tokens(&record.encoder_tokens)?;
        self.check_tokens(&record.decoder_input)?;
        if let Some(eps) = &record.noise {
            if eps.len() != self.config.latent_dim {
                return Err(ModelError::NoiseDimMismatch {
                    got: eps.len(),
                    want: self.config.latent_dim,
                });
            }
        }

        let mut g = Graph::new();
        let (mean, log_scale) = self.encoder_latents(&mut g, &record.encoder_tokens);
        let sample = match &record.noise {
            None => mean,
            Some(eps) => {
                let eps_var = g.constant(Tensor::row(eps.clone()));
                let scale = g.exp(log_scale);
                let scaled = g.mul(eps_var, scale);
                g.add(mean, scaled)
            }
        };

        let v_hat = self.performance_head.forward(&mut g, sample);
        let u_hat = self.redundancy_head.forward(&mut g, sample);
        let v_target = g.constant(Tensor::scalar(record.v));
        let u_target = g.constant(Tensor::scalar(record.u));
        let v_diff = g.sub(v_hat, v_target);
        let loss_performance = g.mul(v_diff, v_diff);
        let u_diff = g.sub(u_hat, u_target);
        let loss_redundancy = g.mul(u_diff, u_diff);

        let logits = self.decoder_logits(&mut g, &record.decoder_input, sample);
        let log_probs = g.log_softmax_rows(logits);
        let picked = g.select_per_row(log_probs, &record.targets);
        let log_likelihood = g.sum_all(picked);
        let loss_reconstruction = g.scale(log_likelihood, -1.0);

        let latent_count = g.constant(Tensor::scalar(self.config.latent_dim as f64));
        let loss_kl = match self.config.kl_form {
            KlForm::AsWritten => {
                let grown = g.exp(log_scale);
                let spread = g.sub(grown, log_scale);
                let mean_sq = g.mul(mean, mean);
                let combined = g.add(spread, mean_sq);
                let summed = g.sum_all(combined);
                g.sub(summed, latent_count)
            }
            KlForm::StandardGaussian => {
                let doubled = g.scale(log_scale, 2.0);
                let grown = g.exp(doubled);
                let spread = g.sub(grown, doubled);
                let mean_sq = g.mul(mean, mean);
                let combined = g.add(spread, mean_sq);
                let summed = g.sum_all(combined);
                let centered = g.sub(summed, latent_count);
                g.scale(centered, 0.5)
            }
        };

        let weighted_perf = g.scale(loss_performance, self.config.performance_weight);
        let weighted_rec = g.scale(loss_reconstruction, self.config.reconstruction_weight);
        let weighted_kl = g.scale(loss_kl, kl_weight);
        let weighted_red = g.scale(loss_redundancy, self.config.redundancy_weight);
        let partial = g.add(weighted_perf, weighted_rec);
        let partial = g.add(partial, weighted_kl);
        let total = g.add(partial, weighted_red);

        let breakdown = LossBreakdown {
            total: g.value(total).item(),
            performance: g.value(loss_performance).item(),
            reconstruction: g.value(loss_reconstruction).item(),
            kl: g.value(loss_kl).item(),
            redundancy: g.value(loss_redundancy).item(),
        };
        let grads = if collect_grads {
            let gradients = g.backward(total);
            Some(g.param_grads(&gradients))
        } else {
            None
        };
        Ok((breakdown, grads))
    }

    /// Mean loss components over a batch of records, under the config's own
    /// loss weights.
    pub fn joint_loss(&self, batch: &[EncodedRecord]) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut sums = LossBreakdown {
            total: 0.0,
            performance: 0.0,
            reconstruction: 0.0,
            kl: 0.0,
            redundancy: 0.0,
        };
        for record in batch {
            let (parts, _) = self.record_loss(record, self.config.kl_weight, false)?;
            sums.total += parts.total;
            sums.performance += parts.performance;
            sums.reconstruction += parts.reconstruction;
            sums.kl += parts.kl;
            sums.redundancy += parts.redundancy;
        }
        let n = batch.len() as f64;
        Ok(LossBreakdown {
            total: sums.total / n,
            performance: sums.performance / n,
            reconstruction: sums.reconstruction / n,
            kl: sums.kl / n,
            redundancy: sums.redundancy / n,
        })
    }
}

/// Additive causal mask: position `i` may attend to positions `0..=i`.
fn causal_mask(len: usize) -> Tensor {
    let mut data = vec![0.0; len * len];
    for i in 0..len {
        for j in (i + 1)..len {
            data[i * len + j] = MASKED_SCORE;
        }
    }
    Tensor::from_vec(len, len, data)
}
