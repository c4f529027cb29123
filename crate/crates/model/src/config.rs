//! Model hyperparameters and loss-weight presets.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Which algebraic form the latent-alignment penalty takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlForm {
    /// `sum(exp(s) - (1 + s) + m^2)` over latent dimensions, treating the
    /// log-scale head's output directly as a variance proxy.
    AsWritten,
    /// The standard diagonal-Gaussian divergence from the unit prior,
    /// `0.5 * sum(exp(2s) - 1 - 2s + m^2)`.
    StandardGaussian,
}

/// Architecture, loss weights, and training schedule in one place.
///
/// Deserialization fills any omitted field from [`ModelConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub token_embedding_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub attention_heads: usize,
    pub feedforward_dim: usize,
    pub latent_dim: usize,
    /// Width of both hidden layers in each score head.
    pub evaluator_hidden: usize,
    /// Weight on the performance-head regression loss.
    pub performance_weight: f64,
    /// Weight on the sequence reconstruction loss.
    pub reconstruction_weight: f64,
    /// Weight on the latent-alignment penalty.
    pub kl_weight: f64,
    /// Weight on the redundancy-head regression loss.
    pub redundancy_weight: f64,
    pub kl_form: KlForm,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Gradient global-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    /// Defaults for runs that model redundancy: score weights 0.5/0.3 with a
    /// 0.001 latent penalty and 0.2 on the redundancy head.
    fn default() -> Self {
        ModelConfig {
            token_embedding_dim: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            attention_heads: 8,
            feedforward_dim: 256,
            latent_dim: 64,
            evaluator_hidden: 200,
            performance_weight: 0.5,
            reconstruction_weight: 0.3,
            kl_weight: 0.001,
            redundancy_weight: 0.2,
            kl_form: KlForm::AsWritten,
            batch_size: 64,
            learning_rate: 1e-4,
            clip_norm: Some(1.0),
            pretrain_epochs: 210,
            finetune_epochs: 90,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Preset for runs that ignore redundancy: 0.8/0.2/0.001 and a zeroed
    /// redundancy head weight.
    pub fn without_redundancy() -> Self {
        ModelConfig {
            performance_weight: 0.8,
            reconstruction_weight: 0.2,
            redundancy_weight: 0.0,
            ..ModelConfig::default()
        }
    }

    /// Split a total epoch budget 70/30 between the two training stages.
    pub fn with_epoch_budget(mut self, total_epochs: usize) -> Self {
        let pretrain = (total_epochs as f64 * 0.7).round() as usize;
        self.pretrain_epochs = pretrain;
        self.finetune_epochs = total_epochs - pretrain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (what, value) in [
            ("token_embedding_dim", self.token_embedding_dim),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("attention_heads", self.attention_heads),
            ("feedforward_dim", self.feedforward_dim),
            ("latent_dim", self.latent_dim),
            ("evaluator_hidden", self.evaluator_hidden),
            ("batch_size", self.batch_size),
        ] {
            if value == 0 {
                return Err(ModelError::NonPositiveDimension { what });
            }
        }
        if self.token_embedding_dim % self.attention_heads != 0 {
            return Err(ModelError::HeadsDontDivide {
                heads: self.attention_heads,
                dim: self.token_embedding_dim,
            });
        }
        for (name, value) in [
            ("performance_weight", self.performance_weight),
            ("reconstruction_weight", self.reconstruction_weight),
            ("kl_weight", self.kl_weight),
            ("redundancy_weight", self.redundancy_weight),
        ] {
            if !(value >= 0.0) {
                return Err(ModelError::NegativeWeight { name, value });
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::BadLearningRate(self.learning_rate));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_presets_differ() {
        ModelConfig::default().validate().unwrap();
        let plain = ModelConfig::without_redundancy();
        plain.validate().unwrap();
        assert_eq!(plain.performance_weight, 0.8);
        assert_eq!(plain.reconstruction_weight, 0.2);
        assert_eq!(plain.redundancy_weight, 0.0);
        assert_eq!(plain.kl_weight, 0.001);
    }

    #[test]
    fn epoch_budget_splits_seventy_thirty() {
        let config = ModelConfig::default().with_epoch_budget(300);
        assert_eq!(config.pretrain_epochs, 210);
        assert_eq!(config.finetune_epochs, 90);
        let small = ModelConfig::default().with_epoch_budget(140);
        assert_eq!(small.pretrain_epochs, 98);
        assert_eq!(small.finetune_epochs, 42);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut bad = ModelConfig::default();
        bad.attention_heads = 7;
        assert!(matches!(
            bad.validate(),
            Err(ModelError::HeadsDontDivide { .. })
        ));

        let mut bad = ModelConfig::default();
        bad.latent_dim = 0;
        assert!(bad.validate().is_err());

        let mut bad = ModelConfig::default();
        bad.kl_weight = -0.1;
        assert!(matches!(bad.validate(), Err(ModelError::NegativeWeight { .. })));

        let mut bad = ModelConfig::default();
        bad.learning_rate = 0.0;
        assert!(matches!(bad.validate(), Err(ModelError::BadLearningRate(_))));
    }
}
