//! Seeded weight initializers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// Uniform Glorot/Xavier initialization for a `[fan_in, fan_out]` matrix.
pub fn xavier_uniform(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Tensor::from_vec(fan_in, fan_out, data)
}

/// Small centered uniform noise, handy for embedding tables.
pub fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::from_vec(rows, cols, data)
}
