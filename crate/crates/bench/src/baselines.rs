//! Classical feature-selection baselines for the benchmark harness.
//!
//! Four reference methods share one entry point: univariate K-Best, greedy
//! mRMR (relevance minus mean redundancy to the already-selected set),
//! L1-regularized linear selection with internal cross-validation, and
//! recursive feature elimination driven by random-forest importances.
//! Selection always uses only the training partition; the reported score
//! comes from [`evaluate_subset`] on the held-out partition.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use fsns_core::{
    default_bins, evaluate_subset, mutual_information, DataSplit, FeatureSubset, ForestConfig,
    RandomForest, RedundancyMatrix, TabularDataset,
};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Which reference selector to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    KBest,
    Mrmr,
    Lasso,
    Rfe,
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BaselineMethod::KBest => "k_best",
            BaselineMethod::Mrmr => "mrmr",
            BaselineMethod::Lasso => "lasso",
            BaselineMethod::Rfe => "rfe",
        };
        f.write_str(s)
    }
}

impl FromStr for BaselineMethod {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k_best" => Ok(BaselineMethod::KBest),
            "mrmr" => Ok(BaselineMethod::Mrmr),
            "lasso" => Ok(BaselineMethod::Lasso),
            "rfe" => Ok(BaselineMethod::Rfe),
            other => Err(BenchError::UnknownName {
                what: "baseline method",
                got: other.to_string(),
                expected: "k_best, mrmr, lasso, rfe",
            }),
        }
    }
}

/// One baseline invocation. `k` is the target subset size for K-Best, mRMR,
/// and RFE; the L1 selector picks its own size and uses `k` only as a cap on
/// nothing (it is ignored). `rfe_step` is how many features RFE drops per
/// elimination round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub method: BaselineMethod,
    pub k: usize,
    #[serde(default = "default_rfe_step")]
    pub rfe_step: usize,
}

fn default_rfe_step() -> usize {
    1
}

impl BaselineSpec {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.k < 1 || self.k > n_features {
            return Err(BenchError::BadSubsetSize {
                k: self.k,
                n_features,
            });
        }
        if self.rfe_step < 1 {
            return Err(BenchError::CountTooSmall {
                what: "rfe elimination step",
                min: 1,
                got: self.rfe_step,
            });
        }
        Ok(())
    }
}

/// One greedy mRMR pick: the chosen feature and the objective value
/// (relevance minus mean redundancy to the prior picks) it achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmrStep {
    pub feature: usize,
    pub objective: f64,
}

/// Result of one baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub method: BaselineMethod,
    pub subset: FeatureSubset,
    /// Held-out score from [`evaluate_subset`].
    pub score: f64,
    /// True when the L1 selector chose zero features and fell back to the
    /// single largest-|coefficient| feature.
    pub fallback: bool,
    /// Greedy trace, populated only for mRMR.
    pub mrmr_trace: Vec<MrmrStep>,
}

/// Mutual information of every feature column with the label, computed on
/// the training rows only.
pub fn relevance_scores(dataset: &TabularDataset, split: &DataSplit) -> Result<Vec<f64>> {
    let labels: Vec<f64> = split
        .train_indices
        .iter()
        .map(|&i| dataset.labels()[i])
        .collect();
    let bins = default_bins(labels.len());
    (0..dataset.n_features())
        .map(|j| {
            let column: Vec<f64> = split
                .train_indices
                .iter()
                .map(|&i| dataset.column(j)[i])
                .collect();
            mutual_information(&column, &labels, bins).map_err(BenchError::from)
        })
        .collect()
}

/// The greedy mRMR objective for adding `candidate` to `selected`:
/// relevance minus the mean redundancy against the already-selected set
/// (just the relevance when nothing is selected yet).
pub fn mrmr_objective(
    relevance: &[f64],
    matrix: &RedundancyMatrix,
    selected: &[usize],
    candidate: usize,
) -> f64 {
    if selected.is_empty() {
        return relevance[candidate];
    }
    let redundancy: f64 = selected.iter().map(|&s| matrix.get(candidate, s)).sum();
    relevance[candidate] - redundancy / selected.len() as f64
}

fn k_best_select(relevance: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn mrmr_select(
    relevance: &[f64],
    matrix: &RedundancyMatrix,
    k: usize,
) -> (Vec<usize>, Vec<MrmrStep>) {
    let p = relevance.len();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    let mut remaining: BTreeSet<usize> = (0..p).collect();
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for &candidate in &remaining {
            let objective = mrmr_objective(relevance, matrix, &selected, candidate);
            let better = match best {
                None => true,
                // Strict improvement only, so ties keep the lowest index
                // (BTreeSet iterates ascending).
                Some((_, incumbent)) => objective > incumbent,
            };
            if better {
                best = Some((candidate, objective));
            }
        }
        let (feature, objective) = best.expect("remaining pool cannot be empty while len < k");
        remaining.remove(&feature);
        selected.push(feature);
        trace.push(MrmrStep { feature, objective });
    }
    (selected, trace)
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

const LASSO_MAX_SWEEPS: usize = 500;
const LASSO_TOLERANCE: f64 = 1e-7;
const LASSO_ZERO: f64 = 1e-12;

/// Cyclic coordinate descent for `(1/2n)‖y − Xw‖² + λ‖w‖₁`, fit on the given
/// row subset of pre-standardized columns.
fn lasso_fit(columns: &[Vec<f64>], y: &[f64], rows: &[usize], lambda: f64) -> Vec<f64> {
    let p = columns.len();
    let n = rows.len() as f64;
    let mut weights = vec![0.0; p];
    // residual[i] = y[i] − Σ_j w_j x_ij, tracked only on `rows`.
    let mut residual: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_step = 0.0_f64;
        for j in 0..p {
            let column = &columns[j];
            let mut rho = 0.0;
            let mut norm = 0.0;
            for (pos, &i) in rows.iter().enumerate() {
                let x = column[i];
                rho += x * (residual[pos] + x * weights[j]);
                norm += x * x;
            }
            rho /= n;
            norm /= n;
            let updated = if norm < LASSO_ZERO {
                0.0
            } else {
                soft_threshold(rho, lambda) / norm
            };
            let step = updated - weights[j];
            if step != 0.0 {
                for (pos, &i) in rows.iter().enumerate() {
                    residual[pos] -= column[i] * step;
                }
                weights[j] = updated;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < LASSO_TOLERANCE {
            break;
        }
    }
    weights
}

fn mean_squared_error(columns: &[Vec<f64>], y: &[f64], rows: &[usize], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for &i in rows {
        let mut prediction = 0.0;
        for (j, w) in weights.iter().enumerate() {
            if *w != 0.0 {
                prediction += w * columns[j][i];
            }
        }
        let gap = y[i] - prediction;
        total += gap * gap;
    }
    total / rows.len() as f64
}

const LASSO_GRID: [f64; 6] = [0.3, 0.1, 0.03, 0.01, 0.003, 0.001];
const LASSO_FOLDS: usize = 3;

/// L1 selection on the training rows: standardize once, pick λ by 3-fold
/// cross-validation over a descending log grid (ties keep the stronger
/// penalty), refit on everything, and keep the nonzero weights. Returns the
/// chosen columns and whether the zero-selection fallback fired.
fn lasso_select(raw_columns: &[Vec<f64>], raw_y: &[f64], seed: u64) -> (Vec<usize>, bool) {
    let p = raw_columns.len();
    let n = raw_y.len();
    let nf = n as f64;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    for raw in raw_columns {
        let mean = raw.iter().sum::<f64>() / nf;
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let std = var.sqrt();
        if std < LASSO_ZERO {
            columns.push(vec![0.0; n]);
        } else {
            columns.push(raw.iter().map(|v| (v - mean) / std).collect());
        }
    }
    let y_mean = raw_y.iter().sum::<f64>() / nf;
    let y: Vec<f64> = raw_y.iter().map(|v| v - y_mean).collect();

    let correlations: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs() / nf)
        .collect();
    let strongest = (0..p)
        .max_by(|&a, &b| correlations[a].total_cmp(&correlations[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let lambda_max = correlations[strongest];
    if lambda_max < LASSO_ZERO {
        // The centered label is orthogonal to every column (e.g. a constant
        // label); no penalty level can select anything.
        return (vec![strongest], true);
    }

    let mut shuffled: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); LASSO_FOLDS];
    for (position, &row) in shuffled.iter().enumerate() {
        folds[position % LASSO_FOLDS].push(row);
    }

    let mut best_lambda = lambda_max * LASSO_GRID[0];
    let mut best_loss = f64::INFINITY;
    for factor in LASSO_GRID {
        let lambda = lambda_max * factor;
        let mut total_loss = 0.0;
        for held_out in &folds {
            let train: Vec<usize> = (0..n).filter(|i| !held_out.contains(i)).collect();
            let weights = lasso_fit(&columns, &y, &train, lambda);
            total_loss += mean_squared_error(&columns, &y, held_out, &weights);
        }
        let mean_loss = total_loss / LASSO_FOLDS as f64;
        // Strict improvement keeps the larger λ on ties (grid is descending).
        if mean_loss < best_loss {
            best_loss = mean_loss;
            best_lambda = lambda;
        }
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let weights = lasso_fit(&columns, &y, &all_rows, best_lambda);
    let selected: Vec<usize> = (0..p).filter(|&j| weights[j].abs() > LASSO_ZERO).collect();
    if selected.is_empty() {
        let strongest_weight = (0..p)
            .max_by(|&a, &b| weights[a].abs().total_cmp(&weights[b].abs()).then(b.cmp(&a)))
            .unwrap_or(strongest);
        // All weights are exactly zero here, so |coefficient| cannot break
        // the tie; fall back to the strongest univariate correlation.
        let pick = if weights[strongest_weight].abs() > 0.0 {
            strongest_weight
        } else {
            strongest
        };
        return (vec![pick], true);
    }
    (selected, false)
}

fn rfe_select(
    dataset: &TabularDataset,
    split: &DataSplit,
    k: usize,
    step: usize,
    seed: u64,
) -> Vec<usize> {
    let rows = &split.train_indices;
    let labels: Vec<f64> = rows.iter().map(|&i| dataset.labels()[i]).collect();
    let config = ForestConfig::with_seed(seed);
    let mut remaining: Vec<usize> = (0..dataset.n_features()).collect();
    while remaining.len() > k {
        let mut x = Array2::<f64>::zeros((rows.len(), remaining.len()));
        for (col, &feature) in remaining.iter().enumerate() {
            let full = dataset.column(feature);
            for (row, &i) in rows.iter().enumerate() {
                x[[row, col]] = full[i];
            }
        }
        let forest = RandomForest::fit(
            x.view(),
            &labels,
            dataset.task(),
            dataset.n_classes(),
            &config,
        );
        let importances = forest.feature_importances().to_vec();
        let n_drop = step.min(remaining.len() - k);
        let mut order: Vec<usize> = (0..remaining.len()).collect();
        // Weakest first; on equal importance drop the higher feature index.
        order.sort_by(|&a, &b| {
            importances[a]
                .total_cmp(&importances[b])
                .then(remaining[b].cmp(&remaining[a]))
        });
        let dropped: BTreeSet<usize> = order[..n_drop].iter().map(|&pos| remaining[pos]).collect();
        remaining.retain(|feature| !dropped.contains(feature));
    }
    remaining
}

/// Run one baseline: select on the training rows, score on the held-out rows.
pub fn run_baseline(
    spec: &BaselineSpec,
    dataset: &TabularDataset,
    split: &DataSplit,
    matrix: &RedundancyMatrix,
    seed: u64,
) -> Result<BaselineOutcome> {
    spec.validate(dataset.n_features())?;
    let mut fallback = false;
    let mut mrmr_trace = Vec::new();

    let indices = match spec.method {
        BaselineMethod::KBest => {
            let relevance = relevance_scores(dataset, split)?;
            k_best_select(&relevance, spec.k)
        }
        BaselineMethod::Mrmr => {
            let relevance = relevance_scores(dataset, split)?;
            let (picked, trace) = mrmr_select(&relevance, matrix, spec.k);
            mrmr_trace = trace;
            picked
        }
        BaselineMethod::Lasso => {
            let columns: Vec<Vec<f64>> = (0..dataset.n_features())
                .map(|j| {
                    let full = dataset.column(j);
                    split.train_indices.iter().map(|&i| full[i]).collect()
                })
                .collect();
            let labels: Vec<f64> = split
                .train_indices
                .iter()
                .map(|&i| dataset.labels()[i])
                .collect();
            let (picked, fell_back) = lasso_select(&columns, &labels, seed);
            fallback = fell_back;
            picked
        }
        BaselineMethod::Rfe => rfe_select(dataset, split, spec.k, spec.rfe_step, seed),
    };

    let subset = FeatureSubset::new(indices)?;
    let score = evaluate_subset(dataset, split, &subset, seed)?;
    Ok(BaselineOutcome {
        method: spec.method,
        subset,
        score,
        fallback,
        mrmr_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fsns_core::{build_matrix, split_ab, RedundancyMetric, Task};
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Six features; the label equals feature 0 plus a trace of feature 2.
    fn planted_dataset() -> TabularDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 120;
        let p = 6;
        let mut x = Array2::<f64>::zeros((n, p));
        let mut y = vec![0.0; n];
        for row in 0..n {
            for col in 0..p {
                x[[row, col]] = rng.sample::<f64, _>(StandardNormal);
            }
            y[row] = x[[row, 0]];
        }
        TabularDataset::from_parts("planted", x, y, Task::Regression, None).unwrap()
    }

    fn zero_matrix(p: usize) -> RedundancyMatrix {
        RedundancyMatrix {
            metric: RedundancyMetric::MutualInformation,
            n_features: p,
            values: vec![0.0; p * p],
        }
    }

    fn spec(method: BaselineMethod, k: usize) -> BaselineSpec {
        BaselineSpec {
            method,
            k,
            rfe_step: 1,
        }
    }

    #[test]
    fn k_best_with_full_k_returns_full_set() {
        let dataset = planted_dataset();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = zero_matrix(6);
        let outcome = run_baseline(&spec(BaselineMethod::KBest, 6), &dataset, &split, &matrix, 0)
            .unwrap();
        assert_eq!(outcome.subset.sorted_indices(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn every_method_selects_the_label_feature() {
        let dataset = planted_dataset();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = build_matrix(&dataset, RedundancyMetric::MutualInformation, None).unwrap();
        for method in [
            BaselineMethod::KBest,
            BaselineMethod::Mrmr,
            BaselineMethod::Lasso,
            BaselineMethod::Rfe,
        ] {
            let outcome = run_baseline(&spec(method, 2), &dataset, &split, &matrix, 0).unwrap();
            assert!(
                outcome.subset.contains(0),
                "{method} missed the label-defining feature: {:?}",
                outcome.subset.sorted_indices()
            );
        }
    }

    #[test]
    fn zero_redundancy_mrmr_matches_k_best() {
        let dataset = planted_dataset();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = zero_matrix(6);
        let kb = run_baseline(&spec(BaselineMethod::KBest, 3), &dataset, &split, &matrix, 0)
            .unwrap();
        let mr = run_baseline(&spec(BaselineMethod::Mrmr, 3), &dataset, &split, &matrix, 0)
            .unwrap();
        assert_eq!(kb.subset.sorted_indices(), mr.subset.sorted_indices());
    }

    #[test]
    fn mrmr_trace_replays_as_greedy_argmax() {
        let dataset = planted_dataset();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = build_matrix(&dataset, RedundancyMetric::MutualInformation, None).unwrap();
        let outcome = run_baseline(&spec(BaselineMethod::Mrmr, 4), &dataset, &split, &matrix, 0)
            .unwrap();
        assert_eq!(outcome.mrmr_trace.len(), 4);

        let relevance = relevance_scores(&dataset, &split).unwrap();
        let mut selected: Vec<usize> = Vec::new();
        for step in &outcome.mrmr_trace {
            let recomputed = mrmr_objective(&relevance, &matrix, &selected, step.feature);
            assert!(
                (recomputed - step.objective).abs() < 1e-12,
                "stored objective {} disagrees with replay {recomputed}",
                step.objective
            );
            for candidate in 0..dataset.n_features() {
                if selected.contains(&candidate) {
                    continue;
                }
                let rival = mrmr_objective(&relevance, &matrix, &selected, candidate);
                assert!(
                    rival <= step.objective + 1e-12,
                    "candidate {candidate} beat recorded pick {}",
                    step.feature
                );
            }
            selected.push(step.feature);
        }
    }

    #[test]
    fn lasso_falls_back_when_nothing_correlates() {
        // A constant label centers to all zeros, so every penalty level
        // zeroes every weight.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 60;
        let mut x = Array2::<f64>::zeros((n, 4));
        for row in 0..n {
            for col in 0..4 {
                x[[row, col]] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let y = vec![2.5; n];
        let dataset = TabularDataset::from_parts("flat", x, y, Task::Regression, None).unwrap();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = zero_matrix(4);
        let outcome = run_baseline(&spec(BaselineMethod::Lasso, 2), &dataset, &split, &matrix, 0)
            .unwrap();
        assert!(outcome.fallback);
        assert_eq!(outcome.subset.len(), 1);
    }

    #[test]
    fn rfe_keeps_the_planted_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 150;
        let p = 6;
        let mut x = Array2::<f64>::zeros((n, p));
        let mut y = vec![0.0; n];
        for row in 0..n {
            for col in 0..p {
                x[[row, col]] = rng.sample::<f64, _>(StandardNormal);
            }
            y[row] = x[[row, 1]] + x[[row, 3]];
        }
        let dataset = TabularDataset::from_parts("pair", x, y, Task::Regression, None).unwrap();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = zero_matrix(p);
        let outcome = run_baseline(&spec(BaselineMethod::Rfe, 2), &dataset, &split, &matrix, 0)
            .unwrap();
        assert_eq!(outcome.subset.sorted_indices(), vec![1, 3]);
    }

    #[test]
    fn baselines_are_deterministic() {
        let dataset = planted_dataset();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = build_matrix(&dataset, RedundancyMetric::MutualInformation, None).unwrap();
        for method in [
            BaselineMethod::KBest,
            BaselineMethod::Mrmr,
            BaselineMethod::Lasso,
            BaselineMethod::Rfe,
        ] {
            let first = run_baseline(&spec(method, 3), &dataset, &split, &matrix, 7).unwrap();
            let second = run_baseline(&spec(method, 3), &dataset, &split, &matrix, 7).unwrap();
            assert_eq!(first.subset.sorted_indices(), second.subset.sorted_indices());
            assert_eq!(first.score.to_bits(), second.score.to_bits());
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let dataset = planted_dataset();
        let split = split_ab(&dataset, 0.2, 0).unwrap();
        let matrix = zero_matrix(6);
        for k in [0, 7] {
            let err = run_baseline(&spec(BaselineMethod::KBest, k), &dataset, &split, &matrix, 0);
            assert!(err.is_err(), "k = {k} should be rejected");
        }
        let bad_step = BaselineSpec {
            method: BaselineMethod::Rfe,
            k: 2,
            rfe_step: 0,
        };
        assert!(run_baseline(&bad_step, &dataset, &split, &matrix, 0).is_err());
    }
}
