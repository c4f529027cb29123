//! Deterministic train/evaluation partitioning.
//!
//! A split carves a dataset into partition A (seen by a selection method)
//! and partition B (held out for final scoring). The same seed always
//! produces the same partition.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{TabularDataset, Task};
use crate::error::{CoreError, Result};

/// Row-index partition of a dataset. `train_indices` is partition A,
/// `test_indices` is partition B; both are sorted ascending.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DataSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl DataSplit {
    /// Builds a split directly from index lists (no validation beyond shape).
    pub fn from_indices(
        train_indices: Vec<usize>,
        test_indices: Vec<usize>,
        seed: u64,
        test_fraction: f64,
    ) -> Self {
        Self {
            train_indices,
            test_indices,
            seed,
            test_fraction,
        }
    }
}

/// Splits a dataset into partitions A and B.
///
/// The test side receives `ceil(n_samples * test_fraction)` rows. For
/// classification the draw is stratified by class whenever every class has
/// at least two samples; otherwise (and always for regression) it is a
/// plain random draw. Both sides must end up non-empty.
pub fn split_ab(dataset: &TabularDataset, test_fraction: f64, seed: u64) -> Result<DataSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CoreError::BadSplitFraction(test_fraction));
    }
    let n = dataset.n_samples();
    let n_test = ((n as f64) * test_fraction).ceil() as usize;
    if n_test == 0 {
        return Err(CoreError::EmptySplitSide {
            side: "test",
            n_samples: n,
            fraction: test_fraction,
        });
    }
    if n_test >= n {
        return Err(CoreError::EmptySplitSide {
            side: "train",
            n_samples: n,
            fraction: test_fraction,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stratify = dataset.task() == Task::Classification && {
        let counts = class_counts(dataset);
        counts.iter().all(|&c| c >= 2)
    };

    let mut test: Vec<usize> = if stratify {
        stratified_test_indices(dataset, n_test, &mut rng)
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(n_test);
        all
    };
    test.sort_unstable();
    let in_test: std::collections::HashSet<usize> = test.iter().copied().collect();
    let train: Vec<usize> = (0..n).filter(|i| !in_test.contains(i)).collect();

    Ok(DataSplit {
        train_indices: train,
        test_indices: test,
        seed,
        test_fraction,
    })
}

fn class_counts(dataset: &TabularDataset) -> Vec<usize> {
    let mut counts = vec![0usize; dataset.n_classes()];
    for &y in dataset.labels() {
        counts[y as usize] += 1;
    }
    counts
}

/// Largest-remainder allocation of the test quota across classes, then a
/// seeded shuffle inside each class.
fn stratified_test_indices(
    dataset: &TabularDataset,
    n_test: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n_classes = dataset.n_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in dataset.labels().iter().enumerate() {
        per_class[y as usize].push(i);
    }

    let fraction = n_test as f64 / dataset.n_samples() as f64;
    let mut quotas: Vec<usize> = Vec::with_capacity(n_classes);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(n_classes);
    for (c, members) in per_class.iter().enumerate() {
        let exact = members.len() as f64 * fraction;
        let q = exact.floor() as usize;
        quotas.push(q);
        remainders.push((exact - q as f64, c));
    }
    // Hand out the remaining slots by largest remainder, smaller class id
    // breaking ties, skipping classes that are already exhausted.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut assigned: usize = quotas.iter().sum();
    let mut cursor = 0;
    while assigned < n_test {
        let (_, c) = remainders[cursor % remainders.len()];
        if quotas[c] < per_class[c].len() {
            quotas[c] += 1;
            assigned += 1;
        }
        cursor += 1;
    }

    let mut test = Vec::with_capacity(n_test);
    for (c, members) in per_class.iter().enumerate() {
        let mut members = members.clone();
        members.shuffle(rng);
        test.extend(members.into_iter().take(quotas[c]));
    }
    test
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(n: usize, labels: Vec<f64>, task: Task) -> TabularDataset {
        let features = Array2::from_shape_fn((n, 3), |(i, j)| (i * 3 + j) as f64);
        TabularDataset::from_parts("toy", features, labels, task, None).unwrap()
    }

    #[test]
    fn test_side_size_follows_ceil_rule() {
        let ds = toy(10, (0..10).map(|i| (i % 2) as f64).collect(), Task::Classification);
        let split = split_ab(&ds, 0.25, 7).unwrap();
        // ceil(10 * 0.25) = 3
        assert_eq!(split.test_indices.len(), 3);
        assert_eq!(split.train_indices.len(), 7);
    }

    #[test]
    fn same_seed_gives_byte_identical_splits() {
        let ds = toy(20, (0..20).map(|i| (i % 2) as f64).collect(), Task::Classification);
        let a = split_ab(&ds, 0.3, 42).unwrap();
        let b = split_ab(&ds, 0.3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "serialized form must be byte-identical across runs"
        );
        let c = split_ab(&ds, 0.3, 43).unwrap();
        assert_ne!(a, c, "a different seed should move at least one row");
    }

    #[test]
    fn sides_are_disjoint_and_cover_all_rows() {
        let ds = toy(17, (0..17).map(|i| i as f64).collect(), Task::Regression);
        let split = split_ab(&ds, 0.4, 3).unwrap();
        let mut all: Vec<usize> = split
            .train_indices
            .iter()
            .chain(split.test_indices.iter())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_split_keeps_class_proportions() {
        // 40 samples, 20 of each class; 25% test => exactly 5 per class.
        let labels: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let ds = toy(40, labels, Task::Classification);
        let split = split_ab(&ds, 0.25, 11).unwrap();
        let test_class_1 = split
            .test_indices
            .iter()
            .filter(|&&i| ds.labels()[i] == 1.0)
            .count();
        assert_eq!(split.test_indices.len(), 10);
        assert_eq!(test_class_1, 5, "stratified draw must follow class proportions");
    }

    #[test]
    fn singleton_class_falls_back_to_plain_draw() {
        // one sample of class 2: stratification is impossible, plain draw runs
        let mut labels: Vec<f64> = (0..15).map(|i| (i % 2) as f64).collect();
        labels[14] = 2.0;
        let ds = toy(15, labels, Task::Classification);
        let split = split_ab(&ds, 0.2, 5).unwrap();
        assert_eq!(split.test_indices.len(), 3);
    }

    #[test]
    fn rejects_out_of_range_fractions() {
        let ds = toy(10, (0..10).map(|i| i as f64).collect(), Task::Regression);
        assert!(matches!(
            split_ab(&ds, 0.0, 1).unwrap_err(),
            CoreError::BadSplitFraction(_)
        ));
        assert!(matches!(
            split_ab(&ds, 1.0, 1).unwrap_err(),
            CoreError::BadSplitFraction(_)
        ));
    }

    #[test]
    fn rejects_fraction_that_empties_the_train_side() {
        let ds = toy(10, (0..10).map(|i| i as f64).collect(), Task::Regression);
        let err = split_ab(&ds, 0.999, 1).unwrap_err();
        assert!(matches!(err, CoreError::EmptySplitSide { side: "train", .. }));
    }
}
