//! Graph-based feature scoring for label-free utility.
//!
//! Features are scored by how much they vary across a nearest-neighbour
//! similarity graph built over the full feature matrix: locality-preserving
//! features receive low scores. Scores are then inverted and averaged to give
//! a subset-level utility in `[0, 1]`.

use fsns_core::{CoreError, FeatureSubset, TabularDataset};

use crate::error::{CollectError, Result};

/// Default number of nearest neighbours in the similarity graph.
pub const DEFAULT_NEIGHBORS: usize = 5;

/// Score every feature by its variation across a heat-kernel neighbour graph.
///
/// The graph connects each row to its `k_neighbors` nearest rows (Euclidean,
/// ties broken toward lower row index) and the adjacency is symmetrised by
/// union. Edge weights are `exp(-d^2 / bandwidth)` where `bandwidth` defaults
/// to the mean squared pairwise distance. A feature's score is the weighted
/// sum of its squared differences along edges divided by its population
/// variance; lower means the feature respects the row geometry better.
/// Constant features score positive infinity.
pub fn laplacian_scores(
    dataset: &TabularDataset,
    k_neighbors: usize,
    bandwidth: Option<f64>,
) -> Result<Vec<f64>> {
    let n = dataset.n_samples();
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(CollectError::BadNeighborCount {
            k: k_neighbors,
            n_samples: n,
        });
    }
    let features = dataset.features();

    let mut squared = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = features
                .row(i)
                .iter()
                .zip(features.row(j).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            squared[i * n + j] = d2;
            squared[j * n + i] = d2;
        }
    }

    let bandwidth = match bandwidth {
        Some(value) if value > 0.0 => value,
        Some(value) => return Err(CollectError::BadBandwidth(value)),
        None => {
            let total: f64 = squared.iter().sum();
            let mean = total / (n * (n - 1)) as f64;
            if mean <= 0.0 {
                return Err(CollectError::DegenerateGeometry);
            }
            mean
        }
    };

    // Union-symmetrised k-nearest-neighbour adjacency with heat-kernel weights.
    let mut weights = vec![0.0; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| {
            squared[i * n + a]
                .total_cmp(&squared[i * n + b])
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k_neighbors) {
            let weight = (-squared[i * n + j] / bandwidth).exp();
            weights[i * n + j] = weight;
            weights[j * n + i] = weight;
        }
    }

    let mut scores = Vec::with_capacity(dataset.n_features());
    for r in 0..dataset.n_features() {
        let column = features.column(r);
        let mean = column.iter().sum::<f64>() / n as f64;
        let variance = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if variance <= 0.0 {
            scores.push(f64::INFINITY);
            continue;
        }
        let mut spread = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let weight = weights[i * n + j];
                if weight > 0.0 {
                    spread += (column[i] - column[j]).powi(2) * weight;
                }
            }
        }
        // Both (i, j) and (j, i) contribute in the ordered-pair definition.
        scores.push(2.0 * spread / variance);
    }
    Ok(scores)
}

/// Average inverted-and-rescaled graph scores over a subset.
///
/// Finite scores are min-max normalised to `[0, 1]` and inverted so the best
/// (lowest) score maps to 1; infinite scores map to 0. When every finite
/// score is identical all of them invert to 1.
pub fn unsupervised_utility(scores: &[f64], subset: &FeatureSubset) -> Result<f64> {
    if subset.is_empty() {
        return Err(CoreError::EmptySubset.into());
    }
    subset.check_bounds(scores.len())?;

    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    let (min, max) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    });
    let span = max - min;

    let inverted = |score: f64| -> f64 {
        if !score.is_finite() {
            0.0
        } else if span > 0.0 {
            1.0 - (score - min) / span
        } else {
            1.0
        }
    };

    let total: f64 = subset
        .sorted_indices()
        .iter()
        .map(|&index| inverted(scores[index]))
        .sum();
    Ok(total / subset.len() as f64)
}
