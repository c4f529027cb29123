//! Small building blocks composed by model crates.

use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, VarId};
use crate::init::xavier_uniform;
use crate::tensor::{Param, Tensor};

/// Dense layer `x W + b` with `W: [in, out]`, `b: [1, out]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: Param::new(format!("{name}.weight"), xavier_uniform(fan_in, fan_out, rng)),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(1, fan_out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: VarId) -> VarId {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Fully connected stack with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims` lists all widths, e.g. `[49, 64, 64, 2]`.
    pub fn new(name: &str, dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an mlp needs input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(&format!("{name}.l{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, g: &mut Graph, mut x: VarId) -> VarId {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, x);
            if i < last {
                x = g.relu(x);
            }
        }
        x
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

/// Fixed sinusoidal position table: `[max_positions, dim]`, never trained.
pub fn sinusoidal_positions(max_positions: usize, dim: usize) -> Tensor {
    let mut data = vec![0.0; max_positions * dim];
    for pos in 0..max_positions {
        for i in 0..dim {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = pos as f64 * rate;
            data[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::from_vec(max_positions, dim, data)
}
