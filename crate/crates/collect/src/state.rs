//! Fixed-width observation encoding for selection agents.
//!
//! A feature subset of any size is summarised as a 49-element vector: each
//! selected column is reduced to seven summary statistics, and each of those
//! seven per-column statistics is then itself reduced by the same seven
//! statistics across columns. The empty subset encodes as all zeros.

use fsns_core::{FeatureSubset, TabularDataset};

/// Number of summary statistics applied per reduction pass.
pub const STATS_PER_PASS: usize = 7;

/// Total length of an encoded observation.
pub const STATE_DIM: usize = STATS_PER_PASS * STATS_PER_PASS;

/// Summarise a slice as `[mean, std, min, max, q25, q50, q75]`.
///
/// The standard deviation is the population form and quantiles use linear
/// interpolation between order statistics. The slice must be non-empty.
pub fn summary_stats(values: &[f64]) -> [f64; STATS_PER_PASS] {
    assert!(!values.is_empty(), "cannot summarise an empty slice");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    [
        mean,
        variance.sqrt(),
        sorted[0],
        sorted[sorted.len() - 1],
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.50),
        quantile_sorted(&sorted, 0.75),
    ]
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let position = (n - 1) as f64 * p;
    let lower = position.floor() as usize;
    let fraction = position - lower as f64;
    if lower + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lower] + fraction * (sorted[lower + 1] - sorted[lower])
    }
}

/// Encode the rows of `dataset` restricted to `subset` as a [`STATE_DIM`]
/// observation.
///
/// Entry `7 * outer + inner` applies the `outer` statistic across columns to
/// the per-column values of the `inner` statistic, so e.g. index 0 is the
/// mean of column means and index 10 is the standard deviation of column
/// minima. The ordering of `subset` does not matter and the empty subset maps
/// to the zero vector.
pub fn encode_state(dataset: &TabularDataset, subset: &FeatureSubset) -> Vec<f64> {
    if subset.is_empty() {
        return vec![0.0; STATE_DIM];
    }
    let features = dataset.features();
    let per_column: Vec<[f64; STATS_PER_PASS]> = subset
        .sorted_indices()
        .iter()
        .map(|&column| {
            let values: Vec<f64> = features.column(column).iter().copied().collect();
            summary_stats(&values)
        })
        .collect();

    let mut state = vec![0.0; STATE_DIM];
    let mut across = vec![0.0; per_column.len()];
    for inner in 0..STATS_PER_PASS {
        for (slot, stats) in across.iter_mut().zip(&per_column) {
            *slot = stats[inner];
        }
        let outer_stats = summary_stats(&across);
        for (outer, &value) in outer_stats.iter().enumerate() {
            state[STATS_PER_PASS * outer + inner] = value;
        }
    }
    state
}
