//! Value-learning agents that each govern a single feature.
//!
//! Every feature gets one agent with a small feed-forward value network over
//! the shared observation vector, a slowly updated target copy of that
//! network, and a bounded first-in-first-out replay buffer. Agents learn from
//! sampled minibatches toward the one-step bootstrapped return.

use std::collections::VecDeque;

use fsns_nn::{Adam, Graph, Mlp, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::state::STATE_DIM;

/// Index of the "keep the feature out" action.
pub const ACTION_DESELECT: usize = 0;
/// Index of the "put the feature in" action.
pub const ACTION_SELECT: usize = 1;
/// Number of actions available to every agent.
pub const N_ACTIONS: usize = 2;

/// One stored interaction: what the agent saw, did, and received.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// One-step bootstrapped return: `reward + discount * next_state_max_q`.
pub fn bellman_target(reward: f64, next_state_max_q: f64, discount: f64) -> f64 {
    reward + discount * next_state_max_q
}

/// A per-feature decision maker with online and target value networks.
pub struct Agent {
    online: Mlp,
    target: Mlp,
    optimizer: Adam,
    replay: VecDeque<Transition>,
    capacity: usize,
    sync_interval: usize,
    updates: usize,
}

impl Agent {
    /// Build an agent whose two networks start from identical random weights.
    pub fn new(
        hidden_width: usize,
        learning_rate: f64,
        replay_capacity: usize,
        sync_interval: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let dims = [STATE_DIM, hidden_width, hidden_width, N_ACTIONS];
        let online = Mlp::new("q", &dims, rng);
        let mut target = Mlp::new("q", &dims, rng);
        copy_params(&online, &mut target);
        Agent {
            online,
            target,
            optimizer: Adam::new(learning_rate, None),
            replay: VecDeque::with_capacity(replay_capacity.min(4096)),
            capacity: replay_capacity,
            sync_interval,
            updates: 0,
        }
    }

    /// Action values of the online network for a single observation.
    pub fn q_values(&self, state: &[f64]) -> [f64; N_ACTIONS] {
        let out = forward_values(&self.online, &[state]);
        [out[0], out[1]]
    }

    /// Highest-value action, preferring deselect on exact ties.
    pub fn greedy_action(&self, state: &[f64]) -> usize {
        let q = self.q_values(state);
        if q[ACTION_SELECT] > q[ACTION_DESELECT] {
            ACTION_SELECT
        } else {
            ACTION_DESELECT
        }
    }

    /// Append a transition, evicting the oldest once capacity is reached.
    pub fn remember(&mut self, transition: Transition) {
        if self.replay.len() == self.capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(transition);
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    /// One minibatch update toward the bootstrapped targets.
    ///
    /// Does nothing until the replay buffer holds at least `batch_size`
    /// transitions; afterwards samples `batch_size` transitions uniformly
    /// with replacement, regresses the taken actions' values toward
    /// [`bellman_target`] under the target network, and periodically copies
    /// the online weights into the target network. Returns the minibatch
    /// squared-error loss when an update ran.
    pub fn train_step(
        &mut self,
        batch_size: usize,
        discount: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<f64> {
        if self.replay.len() < batch_size {
            return None;
        }
        let picks: Vec<usize> = (0..batch_size)
            .map(|_| rng.gen_range(0..self.replay.len()))
            .collect();

        let mut states = Vec::with_capacity(batch_size * STATE_DIM);
        let mut next_states = Vec::with_capacity(batch_size * STATE_DIM);
        let mut actions = Vec::with_capacity(batch_size);
        let mut rewards = Vec::with_capacity(batch_size);
        for &pick in &picks {
            let transition = &self.replay[pick];
            states.extend_from_slice(&transition.state);
            next_states.extend_from_slice(&transition.next_state);
            actions.push(transition.action);
            rewards.push(transition.reward);
        }

        let next_q = forward_batch(&self.target, batch_size, next_states);
        let targets: Vec<f64> = (0..batch_size)
            .map(|row| {
                let base = row * N_ACTIONS;
                let next_max = next_q[base].max(next_q[base + 1]);
                bellman_target(rewards[row], next_max, discount)
            })
            .collect();

        let mut graph = Graph::new();
        let x = graph.constant(Tensor::from_vec(batch_size, STATE_DIM, states));
        let q_all = self.online.forward(&mut graph, x);
        let q_taken = graph.select_per_row(q_all, &actions);
        let y = graph.constant(Tensor::from_vec(batch_size, 1, targets));
        let diff = graph.sub(q_taken, y);
        let squared = graph.mul(diff, diff);
        let sum = graph.sum_all(squared);
        let loss = graph.scale(sum, 1.0 / batch_size as f64);

        let grads = graph.backward(loss);
        let named = graph.param_grads(&grads);
        let mut params = self.online.params_mut();
        self.optimizer.step(&mut params, &named);

        self.updates += 1;
        if self.updates % self.sync_interval == 0 {
            copy_params(&self.online, &mut self.target);
        }
        Some(graph.value(loss).item())
    }

    pub fn updates_taken(&self) -> usize {
        self.updates
    }
}

fn copy_params(from: &Mlp, to: &mut Mlp) {
    let source: Vec<Tensor> = from.params().iter().map(|p| p.tensor.clone()).collect();
    for (dst, tensor) in to.params_mut().into_iter().zip(source) {
        dst.tensor = tensor;
    }
}

fn forward_values(net: &Mlp, states: &[&[f64]]) -> Vec<f64> {
    let mut flat = Vec::with_capacity(states.len() * STATE_DIM);
    for state in states {
        flat.extend_from_slice(state);
    }
    forward_batch(net, states.len(), flat)
}

fn forward_batch(net: &Mlp, rows: usize, flat: Vec<f64>) -> Vec<f64> {
    let mut graph = Graph::new();
    let x = graph.constant(Tensor::from_vec(rows, STATE_DIM, flat));
    let out = net.forward(&mut graph, x);
    graph.value(out).as_slice().to_vec()
}
