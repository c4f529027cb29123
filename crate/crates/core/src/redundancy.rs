//! Pairwise feature-redundancy metrics and the precomputed matrix.
//!
//! Three interchangeable metrics measure how much two feature vectors say
//! about each other: histogram mutual information (bits), absolute
//! population covariance, and absolute Pearson correlation. A
//! `RedundancyMatrix` caches all pairwise values so subset redundancy is a
//! cheap sum over unordered pairs.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{CoreError, Result};
use crate::subset::FeatureSubset;

/// Which pairwise statistic fills the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedundancyMetric {
    MutualInformation,
    CovarianceAbs,
    PearsonAbs,
}

impl std::fmt::Display for RedundancyMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RedundancyMetric::MutualInformation => "mutual_information",
            RedundancyMetric::CovarianceAbs => "covariance_abs",
            RedundancyMetric::PearsonAbs => "pearson_abs",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for RedundancyMetric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mutual_information" | "mi" => Ok(RedundancyMetric::MutualInformation),
            "covariance_abs" | "covariance" => Ok(RedundancyMetric::CovarianceAbs),
            "pearson_abs" | "pearson" => Ok(RedundancyMetric::PearsonAbs),
            other => Err(format!(
                "unknown redundancy metric {other:?}; expected mutual_information, covariance_abs, or pearson_abs"
            )),
        }
    }
}

/// Default histogram resolution: `max(2, floor(sqrt(n_samples)))`.
pub fn default_bins(n_samples: usize) -> usize {
    ((n_samples as f64).sqrt().floor() as usize).max(2)
}

/// Mutual information in bits between two equal-length vectors, estimated
/// from an equal-width joint histogram with `bins` bins per axis.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    check_pair(x, y)?;
    if bins < 2 {
        return Err(CoreError::TooFewBins(bins));
    }
    let n = x.len() as f64;
    let xi = bin_indices(x, bins);
    let yi = bin_indices(y, bins);

    let mut joint = vec![0f64; bins * bins];
    let mut px = vec![0f64; bins];
    let mut py = vec![0f64; bins];
    for (&a, &b) in xi.iter().zip(&yi) {
        joint[a * bins + b] += 1.0;
        px[a] += 1.0;
        py[b] += 1.0;
    }

    // Accumulate cell (a, b) together with its mirror (b, a) so the sum
    // visits terms in an order invariant to swapping the two arguments:
    // mutual_information(x, y) and mutual_information(y, x) are then
    // bitwise equal, not merely equal up to rounding.
    let term = |a: usize, b: usize| -> f64 {
        let c = joint[a * bins + b];
        if c > 0.0 {
            let p_ab = c / n;
            let p_a = px[a] / n;
            let p_b = py[b] / n;
            p_ab * (p_ab / (p_a * p_b)).log2()
        } else {
            0.0
        }
    };
    let mut mi = 0.0;
    for a in 0..bins {
        mi += term(a, a);
        for b in a + 1..bins {
            mi += term(a, b) + term(b, a);
        }
    }
    // The plug-in estimate is non-negative by construction; trim float dust.
    Ok(mi.max(0.0))
}

/// Absolute population covariance (`1/n` normalization).
pub fn covariance_abs(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    Ok(cov.abs())
}

/// Absolute Pearson correlation; 0 when either vector is constant.
pub fn pearson_abs(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sx = (x.iter().map(|&a| (a - mx) * (a - mx)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|&b| (b - my) * (b - my)).sum::<f64>() / n).sqrt();
    if sx == 0.0 || sy == 0.0 {
        return Ok(0.0);
    }
    let cov = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    Ok((cov / (sx * sy)).abs().min(1.0))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(CoreError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(CoreError::EmptyVector);
    }
    Ok(())
}

/// Equal-width bin index per value over `[min, max]`; the maximum lands in
/// the last bin, and a constant vector collapses into bin 0.
fn bin_indices(v: &[f64], bins: usize) -> Vec<usize> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    v.iter()
        .map(|&x| {
            if width == 0.0 {
                0
            } else {
                (((x - min) / width) as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Symmetric matrix of pairwise redundancy values over all features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyMatrix {
    pub metric: RedundancyMetric,
    pub n_features: usize,
    /// Row-major `n_features * n_features` values.
    pub values: Vec<f64>,
}

impl RedundancyMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features + j]
    }

    /// Serializes to pretty JSON (metric name, size, row-major values).
    /// Values survive the round trip exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("matrix serializes");
        std::fs::write(path.as_ref(), text).map_err(|source| CoreError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| CoreError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CoreError::Io {
            path: path.as_ref().display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }
}

/// Computes the full pairwise matrix for a dataset's features. The upper
/// triangle (including the diagonal) is computed once and mirrored, so the
/// result is symmetric by construction. `bins` only affects the mutual
/// information metric and defaults to `default_bins(n_samples)`.
pub fn build_matrix(
    dataset: &TabularDataset,
    metric: RedundancyMetric,
    bins: Option<usize>,
) -> Result<RedundancyMatrix> {
    let p = dataset.n_features();
    let bins = bins.unwrap_or_else(|| default_bins(dataset.n_samples()));
    let columns: Vec<Vec<f64>> = (0..p).map(|j| dataset.column(j).to_vec()).collect();

    let mut values = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let v = match metric {
                RedundancyMetric::MutualInformation => {
                    mutual_information(&columns[i], &columns[j], bins)?
                }
                RedundancyMetric::CovarianceAbs => covariance_abs(&columns[i], &columns[j])?,
                RedundancyMetric::PearsonAbs => pearson_abs(&columns[i], &columns[j])?,
            };
            values[i * p + j] = v;
            values[j * p + i] = v;
        }
    }
    Ok(RedundancyMatrix {
        metric,
        n_features: p,
        values,
    })
}

/// Raw subset redundancy: the sum of matrix entries over unordered feature
/// pairs inside the subset (diagonal excluded). Singletons score 0.
pub fn subset_redundancy(matrix: &RedundancyMatrix, subset: &FeatureSubset) -> Result<f64> {
    subset.check_bounds(matrix.n_features)?;
    let idx = subset.sorted_indices();
    let mut total = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            total += matrix.get(i, j);
        }
    }
    Ok(total)
}

/// Scales a raw redundancy by the full feature set's raw redundancy and
/// clamps into `[0, 1]`. The baseline must be strictly positive.
pub fn normalize_redundancy(raw: f64, full_set_raw: f64) -> Result<f64> {
    if full_set_raw <= 0.0 {
        return Err(CoreError::NonPositiveBaseline(full_set_raw));
    }
    Ok((raw / full_set_raw).clamp(0.0, 1.0))
}

/// Convenience wrapper around `Array2` construction for tests and tools.
pub fn matrix_as_array(matrix: &RedundancyMatrix) -> Array2<f64> {
    Array2::from_shape_vec(
        (matrix.n_features, matrix.n_features),
        matrix.values.clone(),
    )
    .expect("row-major values match the declared size")
}
