//! Adam with optional global gradient-norm clipping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tensor::Param;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global L2 clip threshold applied to the whole gradient vector.
    pub clip_norm: Option<f64>,
    step: u64,
    first_moment: BTreeMap<String, Vec<f64>>,
    second_moment: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, clip_norm: Option<f64>) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters without a gradient entry are left
    /// untouched; gradient names without a parameter are ignored.
    pub fn step(&mut self, params: &mut [&mut Param], grads: &BTreeMap<String, Vec<f64>>) {
        self.step += 1;
        let scale = match self.clip_norm {
            Some(limit) => {
                let norm_sq: f64 = grads
                    .values()
                    .flat_map(|g| g.iter())
                    .map(|&v| v * v)
                    .sum();
                let norm = norm_sq.sqrt();
                if norm > limit && norm > 0.0 {
                    limit / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };

        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for param in params.iter_mut() {
            let Some(grad) = grads.get(&param.name) else { continue };
            let n = param.tensor.len();
            assert_eq!(grad.len(), n, "gradient shape for {}", param.name);
            let m = self
                .first_moment
                .entry(param.name.clone())
                .or_insert_with(|| vec![0.0; n]);
            let v = self
                .second_moment
                .entry(param.name.clone())
                .or_insert_with(|| vec![0.0; n]);
            let data = param.tensor.make_mut();
            for k in 0..n {
                let g = grad[k] * scale;
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                data[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
