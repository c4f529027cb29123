//! Seeded random-forest learner used as the downstream scoring model.
//!
//! Deliberately small: CART trees grown to purity on bootstrap samples,
//! per-split feature subsampling, majority vote / mean aggregation. Every
//! source of randomness derives from the forest seed, so a fit is a pure
//! function of `(matrix, labels, config)`.

use ndarray::ArrayView2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Task;

/// Number of trees grown by default.
pub const DEFAULT_N_TREES: usize = 100;

#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            n_trees: DEFAULT_N_TREES,
            min_samples_split: 2,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    feature: usize,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
    is_leaf: bool,
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            let node = &self.nodes[at];
            if node.is_leaf {
                return node.value;
            }
            at = if row[node.feature] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
    task: Task,
    n_classes: usize,
    importances: Vec<f64>,
}

impl RandomForest {
    /// Fits a forest on a sample-major matrix. For classification, `y` must
    /// hold class ids `0..n_classes`.
    pub fn fit<'a>(
        x: ArrayView2<'a, f64>,
        y: &'a [f64],
        task: Task,
        n_classes: usize,
        config: &ForestConfig,
    ) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        assert_eq!(n, y.len(), "feature matrix and labels must align");
        assert!(n > 0 && p > 0, "cannot fit a forest on an empty matrix");

        let mtry = match task {
            Task::Classification => (p as f64).sqrt().ceil() as usize,
            Task::Regression => ((p as f64) / 3.0).ceil() as usize,
        }
        .clamp(1, p);

        let mut trees = Vec::with_capacity(config.n_trees);
        let mut importances = vec![0.0; p];
        for t in 0..config.n_trees {
            let tree_seed = config
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(t as u64 + 1));
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                x,
                y,
                task,
                n_classes,
                min_samples_split: config.min_samples_split,
                mtry,
                rng,
                nodes: Vec::new(),
                importances: vec![0.0; p],
                n_root: sample.len() as f64,
            };
            builder.grow(sample);
            for (total, tree) in importances.iter_mut().zip(&builder.importances) {
                *total += tree;
            }
            trees.push(Tree {
                nodes: builder.nodes,
            });
        }

        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            for v in &mut importances {
                *v /= total;
            }
        }

        Self {
            trees,
            task,
            n_classes,
            importances,
        }
    }

    /// Predicts one row: a class id for classification, a value for regression.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.task {
            Task::Classification => {
                let mut votes = vec![0u32; self.n_classes.max(1)];
                for tree in &self.trees {
                    votes[tree.predict(row) as usize] += 1;
                }
                // First maximum wins, i.e. ties break toward the smaller id.
                let mut best = 0usize;
                for (c, &v) in votes.iter().enumerate() {
                    if v > votes[best] {
                        best = c;
                    }
                }
                best as f64
            }
            Task::Regression => {
                let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
                sum / self.trees.len() as f64
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| self.predict_row(r.as_slice().expect("row-major input")))
            .collect()
    }

    /// Mean impurity-decrease importances, normalized to sum to one when any
    /// split happened at all.
    pub fn feature_importances(&self) -> &[f64] {
        &self.importances
    }
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    task: Task,
    n_classes: usize,
    min_samples_split: usize,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    importances: Vec<f64>,
    n_root: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, indices: Vec<usize>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: 0.0,
            is_leaf: true,
        });

        let (impurity, leaf_value) = self.node_stats(&indices);
        self.nodes[id as usize].value = leaf_value;
        if indices.len() < self.min_samples_split || impurity <= 1e-12 {
            return id;
        }

        let Some((feature, threshold, gain)) = self.best_split(&indices, impurity) else {
            return id;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x[[i, feature]] <= threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            return id;
        }

        self.importances[feature] += (indices.len() as f64 / self.n_root) * gain;
        let left = self.grow(left_idx);
        let right = self.grow(right_idx);
        let node = &mut self.nodes[id as usize];
        node.is_leaf = false;
        node.feature = feature;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        id
    }

    /// Mean impurity of the node and its leaf prediction.
    fn node_stats(&self, indices: &[usize]) -> (f64, f64) {
        match self.task {
            Task::Classification => {
                let mut counts = vec![0usize; self.n_classes.max(1)];
                for &i in indices {
                    counts[self.y[i] as usize] += 1;
                }
                let n = indices.len() as f64;
                let gini = 1.0
                    - counts
                        .iter()
                        .map(|&c| {
                            let p = c as f64 / n;
                            p * p
                        })
                        .sum::<f64>();
                let mut best = 0usize;
                for (c, &v) in counts.iter().enumerate() {
                    if v > counts[best] {
                        best = c;
                    }
                }
                (gini, best as f64)
            }
            Task::Regression => {
                let n = indices.len() as f64;
                let sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
                let mean = sum / n;
                let sse: f64 = indices.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
                (sse / n, mean)
            }
        }
    }

    /// Scans a random feature subsample for the best impurity-decrease split.
    fn best_split(&mut self, indices: &[usize], parent_impurity: f64) -> Option<(usize, f64, f64)> {
        let p = self.x.ncols();
        let candidates = rand::seq::index::sample(&mut self.rng, p, self.mtry.min(p));
        let mut best: Option<(usize, f64, f64)> = None;

        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(indices.len());
        for feature in candidates {
            pairs.clear();
            pairs.extend(indices.iter().map(|&i| (self.x[[i, feature]], self.y[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let gain_threshold = match self.task {
                Task::Classification => self.scan_gini(&pairs, parent_impurity),
                Task::Regression => self.scan_sse(&pairs, parent_impurity),
            };
            if let Some((threshold, gain)) = gain_threshold {
                if best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((feature, threshold, gain));
                }
            }
        }
        best.filter(|&(_, _, g)| g > 1e-12)
    }

    fn scan_gini(&self, pairs: &[(f64, f64)], parent_impurity: f64) -> Option<(f64, f64)> {
        let n = pairs.len() as f64;
        let mut left = vec![0f64; self.n_classes.max(1)];
        let mut right = vec![0f64; self.n_classes.max(1)];
        for &(_, y) in pairs {
            right[y as usize] += 1.0;
        }
        let mut n_left = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for w in 0..pairs.len() - 1 {
            let class = pairs[w].1 as usize;
            left[class] += 1.0;
            right[class] -= 1.0;
            n_left += 1.0;
            if pairs[w].0 == pairs[w + 1].0 {
                continue;
            }
            let n_right = n - n_left;
            let gini_l = 1.0 - left.iter().map(|&c| (c / n_left).powi(2)).sum::<f64>();
            let gini_r = 1.0 - right.iter().map(|&c| (c / n_right).powi(2)).sum::<f64>();
            let gain = parent_impurity - (n_left / n) * gini_l - (n_right / n) * gini_r;
            if best.map_or(true, |(_, g)| gain > g) {
                let threshold = 0.5 * (pairs[w].0 + pairs[w + 1].0);
                best = Some((threshold, gain));
            }
        }
        best
    }

    fn scan_sse(&self, pairs: &[(f64, f64)], parent_impurity: f64) -> Option<(f64, f64)> {
        let n = pairs.len() as f64;
        let total_sum: f64 = pairs.iter().map(|&(_, y)| y).sum();
        let total_sq: f64 = pairs.iter().map(|&(_, y)| y * y).sum();
        let mut sum_l = 0.0;
        let mut sq_l = 0.0;
        let mut n_left = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for w in 0..pairs.len() - 1 {
            let y = pairs[w].1;
            sum_l += y;
            sq_l += y * y;
            n_left += 1.0;
            if pairs[w].0 == pairs[w + 1].0 {
                continue;
            }
            let n_right = n - n_left;
            let sse_l = sq_l - sum_l * sum_l / n_left;
            let sum_r = total_sum - sum_l;
            let sse_r = (total_sq - sq_l) - sum_r * sum_r / n_right;
            // Mean impurities weighted by side size, like the gini scan.
            let gain = parent_impurity - (sse_l + sse_r) / n;
            if best.map_or(true, |(_, g)| gain > g) {
                let threshold = 0.5 * (pairs[w].0 + pairs[w + 1].0);
                best = Some((threshold, gain));
            }
        }
        best
    }
}
