//! Feature subset handle.

use crate::error::{CoreError, Result};

/// An ordered list of distinct feature indices.
///
/// Order is preserved as given (a decoder may emit features in any order),
/// but scoring canonicalizes to sorted order so that permutations of the
/// same set behave identically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct FeatureSubset {
    indices: Vec<usize>,
}

impl FeatureSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(indices.len());
        for &i in &indices {
            if !seen.insert(i) {
                return Err(CoreError::DuplicateFeature(i));
            }
        }
        Ok(Self { indices })
    }

    /// The full feature set `0..n_features`.
    pub fn full(n_features: usize) -> Self {
        Self {
            indices: (0..n_features).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    /// Indices in ascending order — the canonical identity of the subset.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }

    /// Validates every index against a feature count.
    pub fn check_bounds(&self, n_features: usize) -> Result<()> {
        for &i in &self.indices {
            if i >= n_features {
                return Err(CoreError::FeatureOutOfRange {
                    index: i,
                    n_features,
                });
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.sorted_indices().iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
