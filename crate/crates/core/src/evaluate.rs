//! Subset scoring against the held-out partition.
//!
//! The score of a feature subset is the performance of a freshly trained
//! random forest restricted to those columns: classification accuracy, or
//! `1 - RAE` for regression. Scoring is a pure function of
//! `(dataset, split, subset, seed)`.

use ndarray::Array2;

use crate::dataset::{Task, TabularDataset};
use crate::error::{CoreError, Result};
use crate::forest::{ForestConfig, RandomForest};
use crate::split::DataSplit;
use crate::subset::FeatureSubset;

/// Largest feature count `brute_force_best_subset` will enumerate (2^12 - 1
/// candidate subsets).
pub const MAX_ENUMERATED_FEATURES: usize = 12;

/// Trains on partition A restricted to `subset`, scores on partition B.
///
/// The subset is canonicalized to sorted column order first, so any
/// permutation of the same indices produces the identical fit and score.
/// Regression scores are `1 - RAE` and may be negative; classification
/// scores are accuracies in `[0, 1]`.
pub fn evaluate_subset(
    dataset: &TabularDataset,
    split: &DataSplit,
    subset: &FeatureSubset,
    seed: u64,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(CoreError::EmptySubset);
    }
    subset.check_bounds(dataset.n_features())?;
    let columns = subset.sorted_indices();

    let x_train = gather(dataset, &split.train_indices, &columns);
    let x_test = gather(dataset, &split.test_indices, &columns);
    let y_train: Vec<f64> = split.train_indices.iter().map(|&i| dataset.labels()[i]).collect();
    let y_test: Vec<f64> = split.test_indices.iter().map(|&i| dataset.labels()[i]).collect();
    if y_train.is_empty() || y_test.is_empty() {
        return Err(CoreError::EmptySplitSide {
            side: if y_train.is_empty() { "train" } else { "test" },
            n_samples: dataset.n_samples(),
            fraction: split.test_fraction,
        });
    }

    let forest = RandomForest::fit(
        x_train.view(),
        &y_train,
        dataset.task(),
        dataset.n_classes(),
        &ForestConfig::with_seed(seed),
    );
    let predictions = forest.predict(x_test.view());

    Ok(match dataset.task() {
        Task::Classification => {
            let correct = predictions
                .iter()
                .zip(&y_test)
                .filter(|(p, y)| p == y)
                .count();
            correct as f64 / y_test.len() as f64
        }
        Task::Regression => {
            let train_mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
            let numer: f64 = predictions
                .iter()
                .zip(&y_test)
                .map(|(p, y)| (y - p).abs())
                .sum();
            let denom: f64 = y_test.iter().map(|y| (y - train_mean).abs()).sum();
            if denom == 0.0 {
                // Degenerate baseline: every test label equals the train mean.
                if numer == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                1.0 - numer / denom
            }
        }
    })
}

/// Scores every non-empty subset of the dataset's features with the same
/// split and seed. Returns `(subset, score)` pairs sorted by descending
/// score; ties order by ascending sorted index list.
pub fn brute_force_best_subset(
    dataset: &TabularDataset,
    split: &DataSplit,
    seed: u64,
) -> Result<Vec<(FeatureSubset, f64)>> {
    let p = dataset.n_features();
    if p > MAX_ENUMERATED_FEATURES {
        return Err(CoreError::TooManyFeatures {
            got: p,
            max: MAX_ENUMERATED_FEATURES,
        });
    }
    let mut out = Vec::with_capacity((1usize << p) - 1);
    for mask in 1u32..(1u32 << p) {
        let indices: Vec<usize> = (0..p).filter(|&i| mask & (1 << i) != 0).collect();
        let subset = FeatureSubset::new(indices).expect("mask indices are distinct");
        let score = evaluate_subset(dataset, split, &subset, seed)?;
        out.push((subset, score));
    }
    out.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.sorted_indices().cmp(&b.0.sorted_indices()))
    });
    Ok(out)
}

fn gather(dataset: &TabularDataset, rows: &[usize], columns: &[usize]) -> Array2<f64> {
    let features = dataset.features();
    Array2::from_shape_fn((rows.len(), columns.len()), |(i, j)| {
        features[[rows[i], columns[j]]]
    })
}
