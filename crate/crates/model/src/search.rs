//! Gradient-steered search in the learned embedding space.
//!
//! Starting from the embeddings of the best-scoring training subsets, each
//! start is pushed along the direction that raises predicted performance and
//! lowers predicted redundancy, then decoded back into a concrete feature
//! subset by constrained greedy decoding. Candidates are ranked by the
//! trade-off `v_hat - lambda * u_hat`.

use std::collections::BTreeMap;

use fsns_collect::{TokenCorpus, EOS, PAD, SOS};
use fsns_core::FeatureSubset;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::SubsetEmbeddingModel;

/// Settings for one search run.
///
/// Deserialization fills any omitted field from [`SearchConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// How many top training subsets seed the search.
    pub n_starts: usize,
    /// Ascent iterations per start.
    pub steps: usize,
    /// Ascent step size.
    pub step_size: f64,
    /// Redundancy trade-off used both in the ascent direction and in the
    /// final candidate ranking.
    pub lambda: f64,
    /// Most feature tokens a decode may emit.
    pub max_decode_length: usize,
    /// Recorded for downstream ground-truth evaluation bookkeeping; the
    /// search itself is deterministic.
    pub seed: u64,
    /// When true the harness re-evaluates decoded candidates on held-out
    /// data and ranks by measured score instead of predicted score.
    pub rerank_ground_truth: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_starts: 25,
            steps: 20,
            step_size: 0.1,
            lambda: 0.1,
            max_decode_length: 32,
            seed: 0,
            rerank_ground_truth: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(ModelError::NonPositiveDimension { what: "n_starts" });
        }
        if self.max_decode_length == 0 {
            return Err(ModelError::NonPositiveDimension {
                what: "max_decode_length",
            });
        }
        if !(self.step_size > 0.0) {
            return Err(ModelError::BadStepSize(self.step_size));
        }
        if !(self.lambda >= 0.0) {
            return Err(ModelError::NegativeTradeoff(self.lambda));
        }
        Ok(())
    }
}

/// Score heads exposed as a differentiable oracle over latent vectors.
///
/// Implemented by the trained model; test doubles can plant closed-form
/// heads to verify the ascent dynamics.
pub trait ScoreHeads {
    fn latent_dim(&self) -> usize;
    /// Predicted `(v, u)` plus their gradients with respect to the latent.
    fn value_and_grads(&self, latent: &[f64]) -> Result<HeadEval>;
}

/// One evaluation of both score heads at a latent point.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadEval {
    pub v: f64,
    pub u: f64,
    pub dv: Vec<f64>,
    pub du: Vec<f64>,
}

impl ScoreHeads for SubsetEmbeddingModel {
    fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn value_and_grads(&self, latent: &[f64]) -> Result<HeadEval> {
        let (v, u, dv, du) = self.scores_with_gradients(latent)?;
        Ok(HeadEval { v, u, dv, du })
    }
}

/// A seed point for the ascent: one distinct training subset and its
/// deterministic embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStart {
    /// Canonical (sorted) feature tokens of the base record.
    pub tokens: Vec<u32>,
    pub v: f64,
    pub u: f64,
    pub latent: Vec<f64>,
}

/// One scored point along an ascent trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub v_hat: f64,
    pub u_hat: f64,
}

/// One decoded candidate subset with its predicted scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub start_index: usize,
    pub embedding: Vec<f64>,
    pub subset: FeatureSubset,
    pub v_hat: f64,
    pub u_hat: f64,
    /// True when decoding emitted no feature and the start's own subset was
    /// used instead.
    pub fell_back: bool,
}

/// A start that could not produce a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartFailure {
    pub start_index: usize,
    pub message: String,
}

/// Outcome of a full search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_embedding: Vec<f64>,
    pub subset: FeatureSubset,
    pub v_hat: f64,
    pub u_hat: f64,
    /// Scored trajectory of every start that completed its ascent.
    pub trajectories: Vec<Vec<TrajectoryPoint>>,
    pub candidates: Vec<Candidate>,
    pub failures: Vec<StartFailure>,
    /// Measured hold-out score of `subset`, filled by the harness.
    pub ground_truth: Option<f64>,
}

/// Pick the `n` distinct base subsets with the highest recorded performance
/// and embed each one deterministically.
///
/// Distinctness is by feature-set identity (augmented shuffles collapse to
/// one entry). Ties on `v` prefer lower `u`, then lexicographically smaller
/// sorted token sequences.
pub fn select_starts(
    corpus: &TokenCorpus,
    model: &SubsetEmbeddingModel,
    n: usize,
) -> Result<Vec<SearchStart>> {
    if corpus.records.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut by_set: BTreeMap<Vec<u32>, (f64, f64)> = BTreeMap::new();
    for record in &corpus.records {
        let mut key = record.tokens.clone();
        key.sort_unstable();
        match by_set.get_mut(&key) {
            None => {
                by_set.insert(key, (record.v, record.u));
            }
            Some(best) => {
                if record.v > best.0 || (record.v == best.0 && record.u < best.1) {
                    *best = (record.v, record.u);
                }
            }
        }
    }
    let mut ranked: Vec<(Vec<u32>, f64, f64)> = by_set
        .into_iter()
        .map(|(tokens, (v, u))| (tokens, v, u))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.2.total_cmp(&b.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(n);

    let mut starts = Vec::with_capacity(ranked.len());
    for (tokens, v, u) in ranked {
        let mask = vec![true; tokens.len()];
        let encoding = model.encode(&tokens, &mask, None)?;
        starts.push(SearchStart {
            tokens,
            v,
            u,
            latent: encoding.sample,
        });
    }
    Ok(starts)
}

/// Iterate `e <- e + step_size * (dv/de - lambda * du/de)` for `steps`
/// steps against frozen heads.
///
/// Returns every visited point, start included (`steps + 1` entries). A
/// non-finite gradient or iterate aborts with [`ModelError::AscentDiverged`].
pub fn gradient_ascend<H: ScoreHeads>(
    heads: &H,
    start: &[f64],
    config: &SearchConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if start.len() != heads.latent_dim() {
        return Err(ModelError::LatentDimMismatch {
            got: start.len(),
            want: heads.latent_dim(),
        });
    }
    let mut trajectory = Vec::with_capacity(config.steps + 1);
    let mut point = start.to_vec();
    trajectory.push(point.clone());
    for step in 0..config.steps {
        let eval = heads.value_and_grads(&point)?;
        for i in 0..point.len() {
            let direction = eval.dv[i] - config.lambda * eval.du[i];
            point[i] += config.step_size * direction;
        }
        if point.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::AscentDiverged { step });
        }
        trajectory.push(point.clone());
    }
    Ok(trajectory)
}

/// Greedily decode a latent into a feature subset.
///
/// At each step the most probable admissible token is taken: padding, the
/// start marker, and already-emitted features are skipped in favor of the
/// next-best token. Decoding stops at the end marker or after `max_len`
/// features. Emitting no feature at all is an error so the caller can fall
/// back.
pub fn decode_subset(
    model: &SubsetEmbeddingModel,
    latent: &[f64],
    max_len: usize,
) -> Result<FeatureSubset> {
    if max_len == 0 {
        return Err(ModelError::NonPositiveDimension {
            what: "max_decode_length",
        });
    }
    let mut prefix = vec![SOS];
    let mut features: Vec<usize> = Vec::new();
    let vocabulary = model.vocabulary();

    while features.len() < max_len && prefix.len() < model.max_positions {
        let probs = model.decode_step(latent, &prefix)?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));

        let mut chosen = None;
        for token in order {
            let token = token as u32;
            if token == PAD || token == SOS {
                continue;
            }
            if token == EOS {
                chosen = Some(token);
                break;
            }
            let feature = vocabulary
                .token_to_feature(token)
                .expect("non-special tokens map to features");
            if features.contains(&feature) {
                continue;
            }
            chosen = Some(token);
            break;
        }
        match chosen {
            None | Some(EOS) => break,
            Some(token) => {
                features.push(
                    vocabulary
                        .token_to_feature(token)
                        .expect("chosen token is a feature"),
                );
                prefix.push(token);
            }
        }
    }
    if features.is_empty() {
        return Err(ModelError::EmptyDecode);
    }
    Ok(FeatureSubset::new(features)?)
}

/// Index of the best candidate under `v_hat - lambda * u_hat`; ties keep
/// the earliest. `None` on an empty pool.
pub fn rank_candidates(candidates: &[Candidate], lambda: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, candidate) in candidates.iter().enumerate() {
        let score = candidate.v_hat - lambda * candidate.u_hat;
        match best {
            Some((_, incumbent)) if score <= incumbent => {}
            _ => best = Some((i, score)),
        }
    }
    best.map(|(i, _)| i)
}

/// Full search: seed from the corpus, ascend every start, decode, and rank.
///
/// A start that diverges during ascent is recorded in `failures` and skipped;
/// a start whose decode emits nothing falls back to its own training subset.
/// Every start failing is an error.
pub fn search(
    model: &SubsetEmbeddingModel,
    corpus: &TokenCorpus,
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let starts = select_starts(corpus, model, config.n_starts)?;

    let mut trajectories = Vec::new();
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for (start_index, start) in starts.iter().enumerate() {
        let trajectory = match gradient_ascend(model, &start.latent, config) {
            Ok(t) => t,
            Err(err) => {
                failures.push(StartFailure {
                    start_index,
                    message: err.to_string(),
                });
                continue;
            }
        };
        let mut points = Vec::with_capacity(trajectory.len());
        let mut scores_ok = true;
        for (step, point) in trajectory.iter().enumerate() {
            let (v_hat, u_hat) = model.predict_scores(point)?;
            if !v_hat.is_finite() || !u_hat.is_finite() {
                scores_ok = false;
                failures.push(StartFailure {
                    start_index,
                    message: format!("non-finite predicted score at step {step}"),
                });
                break;
            }
            points.push(TrajectoryPoint { step, v_hat, u_hat });
        }
        if !scores_ok {
            continue;
        }
        let embedding = trajectory.last().expect("trajectory never empty").clone();
        let last = *points.last().expect("one point per trajectory entry");

        let (subset, fell_back) = match decode_subset(model, &embedding, config.max_decode_length)
        {
            Ok(subset) => (subset, false),
            Err(ModelError::EmptyDecode) => {
                let own: Vec<usize> = start
                    .tokens
                    .iter()
                    .filter_map(|&t| model.vocabulary().token_to_feature(t))
                    .collect();
                (FeatureSubset::new(own)?, true)
            }
            Err(other) => return Err(other),
        };
        trajectories.push(points);
        candidates.push(Candidate {
            start_index,
            embedding,
            subset,
            v_hat: last.v_hat,
            u_hat: last.u_hat,
            fell_back,
        });
    }

    let Some(winner) = rank_candidates(&candidates, config.lambda) else {
        return Err(ModelError::AllStartsFailed);
    };
    let best = &candidates[winner];
    Ok(SearchResult {
        best_embedding: best.embedding.clone(),
        subset: best.subset.clone(),
        v_hat: best.v_hat,
        u_hat: best.u_hat,
        trajectories,
        candidates,
        failures,
        ground_truth: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::train::train;
    use approx::assert_relative_eq;
    use fsns_collect::{SubsetRecord, Vocabulary};
    use fsns_nn::Tensor;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            token_embedding_dim: 16,
            encoder_layers: 1,
            decoder_layers: 1,
            attention_heads: 2,
            feedforward_dim: 24,
            latent_dim: 8,
            evaluator_hidden: 12,
            batch_size: 4,
            learning_rate: 5e-3,
            seed: 21,
            ..ModelConfig::default()
        }
    }

    fn tiny_model(n_features: usize, max_positions: usize) -> SubsetEmbeddingModel {
        SubsetEmbeddingModel::new(tiny_config(), n_features, max_positions).unwrap()
    }

    fn set_param(model: &mut SubsetEmbeddingModel, name: &str, tensor: Tensor) {
        let mut found = false;
        for param in model.params_mut() {
            if param.name == name {
                param.tensor = tensor.clone();
                found = true;
            }
        }
        assert!(found, "no parameter named {name}");
    }

    /// Decoder that assigns fixed logits: zero projection weights plus a
    /// hand-set bias, so every step produces the same distribution.
    fn fixed_logit_model(n_features: usize, bias: &[(usize, f64)]) -> SubsetEmbeddingModel {
        let mut model = tiny_model(n_features, 8);
        let vocab_size = model.vocab_size();
        set_param(
            &mut model,
            "decoder.out.weight",
            Tensor::zeros(16, vocab_size),
        );
        let mut values = vec![0.0; vocab_size];
        for &(token, logit) in bias {
            values[token] = logit;
        }
        set_param(&mut model, "decoder.out.bias", Tensor::row(values));
        model
    }

    /// Planted quadratic heads: v = -|e-a|^2, u = -|e-b|^2.
    struct QuadraticHeads {
        a: Vec<f64>,
        b: Vec<f64>,
    }

    impl ScoreHeads for QuadraticHeads {
        fn latent_dim(&self) -> usize {
            self.a.len()
        }
        fn value_and_grads(&self, latent: &[f64]) -> Result<HeadEval> {
            let sq = |c: &[f64]| -> f64 {
                latent.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum()
            };
            let grad = |c: &[f64]| -> Vec<f64> {
                latent.iter().zip(c).map(|(x, y)| -2.0 * (x - y)).collect()
            };
            Ok(HeadEval {
                v: -sq(&self.a),
                u: -sq(&self.b),
                dv: grad(&self.a),
                du: grad(&self.b),
            })
        }
    }

    /// Heads with zero gradient everywhere.
    struct FlatHeads {
        dim: usize,
    }

    impl ScoreHeads for FlatHeads {
        fn latent_dim(&self) -> usize {
            self.dim
        }
        fn value_and_grads(&self, _latent: &[f64]) -> Result<HeadEval> {
            Ok(HeadEval {
                v: 0.25,
                u: 0.75,
                dv: vec![0.0; self.dim],
                du: vec![0.0; self.dim],
            })
        }
    }

    fn candidate(start_index: usize, v_hat: f64, u_hat: f64) -> Candidate {
        Candidate {
            start_index,
            embedding: vec![0.0; 2],
            subset: FeatureSubset::new(vec![start_index]).unwrap(),
            v_hat,
            u_hat,
            fell_back: false,
        }
    }

    #[test]
    fn quadratic_heads_converge_to_the_closed_form_fixed_point() {
        let a = vec![1.0, -0.5, 2.0, 0.25];
        let b = vec![-1.0, 0.5, 1.0, 0.75];
        let heads = QuadraticHeads {
            a: a.clone(),
            b: b.clone(),
        };
        let config = SearchConfig {
            steps: 60,
            step_size: 0.1,
            lambda: 0.1,
            ..SearchConfig::default()
        };
        let trajectory = gradient_ascend(&heads, &[0.0; 4], &config).unwrap();
        let finish = trajectory.last().unwrap();
        for i in 0..4 {
            let expected = (a[i] - config.lambda * b[i]) / (1.0 - config.lambda);
            assert_relative_eq!(finish[i], expected, epsilon = 1e-3);
        }
    }

    #[test]
    fn zero_gradient_start_is_exactly_invariant() {
        let heads = FlatHeads { dim: 3 };
        let start = [0.4, -1.2, 3.3];
        let config = SearchConfig {
            steps: 7,
            ..SearchConfig::default()
        };
        let trajectory = gradient_ascend(&heads, &start, &config).unwrap();
        assert_eq!(trajectory.len(), 8);
        for point in &trajectory {
            assert_eq!(point.as_slice(), start.as_slice());
        }
    }

    #[test]
    fn trajectory_length_is_steps_plus_one() {
        let heads = QuadraticHeads {
            a: vec![0.0; 2],
            b: vec![0.0; 2],
        };
        for steps in [0, 1, 5] {
            let config = SearchConfig {
                steps,
                ..SearchConfig::default()
            };
            let trajectory = gradient_ascend(&heads, &[1.0, 1.0], &config).unwrap();
            assert_eq!(trajectory.len(), steps + 1);
        }
    }

    #[test]
    fn pure_performance_ascent_does_not_decrease_the_score() {
        let model = tiny_model(6, 8);
        let start = model.encode(&[3, 5], &[true, true], None).unwrap().sample;
        let config = SearchConfig {
            steps: 12,
            step_size: 1e-4,
            lambda: 0.0,
            ..SearchConfig::default()
        };
        let trajectory = gradient_ascend(&model, &start, &config).unwrap();
        let mut previous = f64::NEG_INFINITY;
        for point in &trajectory {
            let (v_hat, _) = model.predict_scores(point).unwrap();
            assert!(
                v_hat >= previous - 1e-9,
                "score decreased: {previous} -> {v_hat}"
            );
            previous = v_hat;
        }
    }

    #[test]
    fn non_finite_gradients_abort_the_ascent() {
        struct PoisonHeads;
        impl ScoreHeads for PoisonHeads {
            fn latent_dim(&self) -> usize {
                2
            }
            fn value_and_grads(&self, _latent: &[f64]) -> Result<HeadEval> {
                Ok(HeadEval {
                    v: 0.0,
                    u: 0.0,
                    dv: vec![f64::NAN, 0.0],
                    du: vec![0.0, 0.0],
                })
            }
        }
        let config = SearchConfig {
            steps: 3,
            ..SearchConfig::default()
        };
        assert!(matches!(
            gradient_ascend(&PoisonHeads, &[0.0, 0.0], &config),
            Err(ModelError::AscentDiverged { step: 0 })
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = SearchConfig::default();
        assert!(ok.validate().is_ok());
        let cases = [
            SearchConfig {
                n_starts: 0,
                ..ok.clone()
            },
            SearchConfig {
                step_size: 0.0,
                ..ok.clone()
            },
            SearchConfig {
                step_size: f64::NAN,
                ..ok.clone()
            },
            SearchConfig {
                lambda: -0.1,
                ..ok.clone()
            },
            SearchConfig {
                max_decode_length: 0,
                ..ok.clone()
            },
        ];
        for bad in cases {
            assert!(bad.validate().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn decode_follows_the_dominant_logits() {
        // Token 5 strongly preferred: emitted once, then skipped as a
        // duplicate, leaving the end marker as the next-best choice.
        let model = fixed_logit_model(6, &[(5, 10.0)]);
        let subset = decode_subset(&model, &vec![0.0; 8], 8).unwrap();
        assert_eq!(subset.sorted_indices(), vec![2]);

        // Two preferred tokens decode in logit order before termination.
        let model = fixed_logit_model(6, &[(5, 10.0), (6, 9.0)]);
        let subset = decode_subset(&model, &vec![0.0; 8], 8).unwrap();
        assert_eq!(subset.sorted_indices(), vec![2, 3]);
    }

    #[test]
    fn decode_truncates_at_the_length_budget() {
        let model = fixed_logit_model(6, &[(5, 10.0), (6, 9.0), (7, 8.0), (2, -5.0)]);
        let subset = decode_subset(&model, &vec![0.0; 8], 2).unwrap();
        assert_eq!(subset.sorted_indices(), vec![2, 3]);
        let wider = decode_subset(&model, &vec![0.0; 8], 3).unwrap();
        assert_eq!(wider.sorted_indices(), vec![2, 3, 4]);
    }

    #[test]
    fn uniform_decoder_yields_empty_decode() {
        // All logits equal: ties break toward the lowest token id, which is
        // the end marker once padding and start are skipped.
        let model = fixed_logit_model(6, &[]);
        assert!(matches!(
            decode_subset(&model, &vec![0.0; 8], 8),
            Err(ModelError::EmptyDecode)
        ));
    }

    #[test]
    fn overfit_model_decodes_its_training_subset() {
        let sequence = vec![5u32, 9, 8];
        let records = (0..4)
            .map(|_| SubsetRecord {
                tokens: sequence.clone(),
                v: 0.9,
                u: 0.1,
            })
            .collect();
        let corpus = TokenCorpus {
            records,
            vocabulary: Vocabulary::new(7),
            max_sequence_length: 5,
            augment_copies: 3,
            source_hash: "overfit".into(),
        };
        let mut config = tiny_config();
        config.pretrain_epochs = 150;
        config.finetune_epochs = 0;
        let mut model = SubsetEmbeddingModel::new(config, 7, 5).unwrap();
        train(&mut model, &corpus, None).unwrap();

        let latent = model
            .encode(&sequence, &[true, true, true], None)
            .unwrap()
            .sample;
        let subset = decode_subset(&model, &latent, 4).unwrap();
        assert_eq!(subset.sorted_indices(), vec![2, 5, 6]);
    }

    #[test]
    fn start_selection_ranks_and_deduplicates() {
        let corpus = TokenCorpus {
            records: vec![
                SubsetRecord {
                    tokens: vec![3],
                    v: 0.9,
                    u: 0.5,
                },
                SubsetRecord {
                    tokens: vec![4],
                    v: 0.9,
                    u: 0.2,
                },
                SubsetRecord {
                    tokens: vec![4, 3],
                    v: 0.9,
                    u: 0.2,
                },
                // Shuffled duplicate of the same base subset.
                SubsetRecord {
                    tokens: vec![3, 4],
                    v: 0.9,
                    u: 0.2,
                },
                SubsetRecord {
                    tokens: vec![5],
                    v: 0.8,
                    u: 0.0,
                },
            ],
            vocabulary: Vocabulary::new(4),
            max_sequence_length: 4,
            augment_copies: 0,
            source_hash: "starts".into(),
        };
        let model = tiny_model(4, 4);
        let starts = select_starts(&corpus, &model, 10).unwrap();
        // Four distinct base subsets; v ties resolved by lower u, then
        // lexicographic sorted tokens ([3,4] before [4]).
        assert_eq!(starts.len(), 4);
        assert_eq!(starts[0].tokens, vec![3, 4]);
        assert_eq!(starts[1].tokens, vec![4]);
        assert_eq!(starts[2].tokens, vec![3]);
        assert_eq!(starts[3].tokens, vec![5]);

        let top = select_starts(&corpus, &model, 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].tokens, vec![3, 4]);
        let encoded = model.encode(&[3, 4], &[true, true], None).unwrap();
        assert_eq!(top[0].latent, encoded.sample);
    }

    #[test]
    fn ranking_is_invariant_to_uniform_affine_rescaling() {
        let pool = vec![
            candidate(0, 0.8, 0.9),
            candidate(1, 0.7, 0.1),
            candidate(2, 0.5, 0.0),
            candidate(3, 0.75, 0.4),
        ];
        let lambda = 0.3;
        let winner = rank_candidates(&pool, lambda).unwrap();
        let rescaled: Vec<Candidate> = pool
            .iter()
            .map(|c| candidate(c.start_index, 2.5 * c.v_hat + 7.0, 2.5 * c.u_hat + 7.0))
            .collect();
        assert_eq!(rank_candidates(&rescaled, lambda).unwrap(), winner);
    }

    #[test]
    fn raising_lambda_never_raises_the_winning_redundancy() {
        let pool = vec![
            candidate(0, 0.9, 0.8),
            candidate(1, 0.8, 0.5),
            candidate(2, 0.6, 0.2),
            candidate(3, 0.4, 0.05),
            candidate(4, 0.3, 0.0),
        ];
        let mut previous_u = f64::INFINITY;
        for step in 0..=10 {
            let lambda = step as f64 / 10.0;
            let winner = rank_candidates(&pool, lambda).unwrap();
            let u = pool[winner].u_hat;
            assert!(
                u <= previous_u + 1e-12,
                "u rose from {previous_u} to {u} at lambda {lambda}"
            );
            previous_u = u;
        }
    }

    #[test]
    fn degenerate_search_decodes_the_best_start_directly() {
        let model = fixed_logit_model(6, &[(5, 10.0), (7, 9.0)]);
        let corpus = TokenCorpus {
            records: vec![
                SubsetRecord {
                    tokens: vec![3, 4],
                    v: 0.9,
                    u: 0.1,
                },
                SubsetRecord {
                    tokens: vec![6],
                    v: 0.2,
                    u: 0.9,
                },
            ],
            vocabulary: Vocabulary::new(6),
            max_sequence_length: 4,
            augment_copies: 0,
            source_hash: "degenerate".into(),
        };
        let config = SearchConfig {
            n_starts: 1,
            steps: 0,
            max_decode_length: 4,
            ..SearchConfig::default()
        };
        let result = search(&model, &corpus, &config).unwrap();
        assert_eq!(result.candidates.len(), 1);
        assert_eq!(result.trajectories[0].len(), 1);

        let start_latent = model.encode(&[3, 4], &[true, true], None).unwrap().sample;
        assert_eq!(result.best_embedding, start_latent);
        let direct = decode_subset(&model, &start_latent, 4).unwrap();
        assert_eq!(result.subset.sorted_indices(), direct.sorted_indices());
        assert_eq!(result.subset.sorted_indices(), vec![2, 4]);

        // Determinism: the same frozen model and corpus reproduce the result.
        let again = search(&model, &corpus, &config).unwrap();
        assert_eq!(again.best_embedding, result.best_embedding);
        assert_eq!(again.v_hat.to_bits(), result.v_hat.to_bits());
        assert_eq!(
            again.subset.sorted_indices(),
            result.subset.sorted_indices()
        );

        // Ground-truth reranking is a harness concern; the flag must not
        // change the in-model search output.
        let flagged = SearchConfig {
            rerank_ground_truth: true,
            ..config
        };
        let reranked = search(&model, &corpus, &flagged).unwrap();
        assert_eq!(
            reranked.subset.sorted_indices(),
            result.subset.sorted_indices()
        );
    }

    #[test]
    fn empty_decode_falls_back_to_the_start_subset() {
        // Uniform decoder: every decode terminates immediately, so every
        // candidate is the start's own subset.
        let model = fixed_logit_model(6, &[]);
        let corpus = TokenCorpus {
            records: vec![
                SubsetRecord {
                    tokens: vec![4, 6],
                    v: 0.9,
                    u: 0.1,
                },
                SubsetRecord {
                    tokens: vec![3],
                    v: 0.5,
                    u: 0.5,
                },
            ],
            vocabulary: Vocabulary::new(6),
            max_sequence_length: 4,
            augment_copies: 0,
            source_hash: "fallback".into(),
        };
        let config = SearchConfig {
            n_starts: 2,
            steps: 2,
            step_size: 1e-3,
            max_decode_length: 4,
            ..SearchConfig::default()
        };
        let result = search(&model, &corpus, &config).unwrap();
        assert_eq!(result.candidates.len(), 2);
        assert!(result.candidates.iter().all(|c| c.fell_back));
        let sets: Vec<Vec<usize>> = result
            .candidates
            .iter()
            .map(|c| c.subset.sorted_indices())
            .collect();
        assert!(sets.contains(&vec![1, 3]));
        assert!(sets.contains(&vec![0]));
    }

    #[test]
    fn all_starts_failing_is_an_error() {
        let mut model = tiny_model(6, 8);
        set_param(
            &mut model,
            "performance.l0.weight",
            Tensor::filled(8, 12, f64::NAN),
        );
        let corpus = TokenCorpus {
            records: vec![SubsetRecord {
                tokens: vec![3, 4],
                v: 0.9,
                u: 0.1,
            }],
            vocabulary: Vocabulary::new(6),
            max_sequence_length: 4,
            augment_copies: 0,
            source_hash: "poison".into(),
        };
        let config = SearchConfig {
            n_starts: 1,
            steps: 3,
            max_decode_length: 4,
            ..SearchConfig::default()
        };
        match search(&model, &corpus, &config) {
            Err(ModelError::AllStartsFailed) => {}
            other => panic!("expected total failure, got {other:?}"),
        }
    }
}
