//! Seeded synthetic dataset generators with ground-truth metadata.
//!
//! Three families cover the benchmark's needs: `noise` buries a few
//! informative regression features among independent standard-normal
//! distractors, `redundant` adds controlled near-duplicates of each
//! informative feature, and `separable` builds a two-class problem whose
//! classes separate along a handful of axes. Every generator is a pure
//! function of its spec (including the seed), and the metadata records which
//! column indices actually carry signal.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use fsns_core::{TabularDataset, Task};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Which synthetic family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Informative regression features plus independent noise features.
    Noise,
    /// Informative features plus correlated near-duplicates (and optional
    /// extra noise features).
    Redundant,
    /// Two Gaussian classes separated along the informative axes.
    Separable,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SynthKind::Noise => "noise",
            SynthKind::Redundant => "redundant",
            SynthKind::Separable => "separable",
        };
        f.write_str(s)
    }
}

impl FromStr for SynthKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(SynthKind::Noise),
            "redundant" => Ok(SynthKind::Redundant),
            "separable" => Ok(SynthKind::Separable),
            other => Err(BenchError::UnknownName {
                what: "synthetic kind",
                got: other.to_string(),
                expected: "noise, redundant, separable",
            }),
        }
    }
}

/// Full description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Number of signal-carrying features (class axes for `separable`).
    pub informative: usize,
    /// Number of pure-noise features.
    #[serde(default)]
    pub noise: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// `redundant` only: near-duplicates added per informative feature.
    #[serde(default = "default_duplicates")]
    pub duplicates: usize,
    /// `redundant` only: correlation of each duplicate with its source;
    /// 1.0 produces exact copies.
    #[serde(default = "default_correlation")]
    pub correlation: f64,
}

fn default_duplicates() -> usize {
    2
}

fn default_correlation() -> f64 {
    1.0
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.informative < 1 {
            return Err(BenchError::CountTooSmall {
                what: "informative feature count",
                min: 1,
                got: self.informative,
            });
        }
        if self.samples < fsns_core::MIN_SAMPLES {
            return Err(BenchError::CountTooSmall {
                what: "sample count",
                min: fsns_core::MIN_SAMPLES,
                got: self.samples,
            });
        }
        let total = self.total_features();
        if total < fsns_core::MIN_FEATURES {
            return Err(BenchError::CountTooSmall {
                what: "total feature count",
                min: fsns_core::MIN_FEATURES,
                got: total,
            });
        }
        if self.kind == SynthKind::Redundant && !(0.0..=1.0).contains(&self.correlation) {
            return Err(BenchError::BadCorrelation(self.correlation));
        }
        Ok(())
    }

    pub fn total_features(&self) -> usize {
        match self.kind {
            SynthKind::Noise | SynthKind::Separable => self.informative + self.noise,
            SynthKind::Redundant => self.informative * (1 + self.duplicates) + self.noise,
        }
    }

    pub fn task(&self) -> Task {
        match self.kind {
            SynthKind::Noise | SynthKind::Redundant => Task::Regression,
            SynthKind::Separable => Task::Classification,
        }
    }

    fn name(&self) -> String {
        format!(
            "synth-{}-i{}-n{}-s{}-seed{}",
            self.kind, self.informative, self.noise, self.samples, self.seed
        )
    }
}

/// Ground truth accompanying a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub name: String,
    pub kind: SynthKind,
    pub task: Task,
    /// Column indices that actually influence the label.
    pub informative: Vec<usize>,
    pub n_features: usize,
    pub n_samples: usize,
    pub seed: u64,
}

/// Per-informative-feature regression weights: deterministic, spread over
/// [1.0, 1.0 + 0.35·(k−1)] so every informative feature matters but not
/// equally.
fn signal_weights(count: usize) -> Vec<f64> {
    (0..count).map(|i| 1.0 + 0.35 * i as f64).collect()
}

/// Generate the dataset plus its ground-truth metadata.
pub fn generate(spec: &SynthSpec) -> Result<(TabularDataset, SynthMetadata)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.samples;
    let p = spec.total_features();
    let mut x = Array2::<f64>::zeros((n, p));
    let mut y = vec![0.0; n];
    let informative: Vec<usize>;

    match spec.kind {
        SynthKind::Noise => {
            let k = spec.informative;
            let weights = signal_weights(k);
            for row in 0..n {
                let mut target = 0.0;
                for j in 0..p {
                    let value: f64 = rng.sample(StandardNormal);
                    x[[row, j]] = value;
                    if j < k {
                        target += weights[j] * value;
                    }
                }
                let jitter: f64 = rng.sample(StandardNormal);
                y[row] = target + 0.05 * jitter;
            }
            informative = (0..k).collect();
        }
        SynthKind::Redundant => {
            let k = spec.informative;
            let weights = signal_weights(k);
            let rho = spec.correlation;
            let mix = (1.0 - rho * rho).sqrt();
            for row in 0..n {
                let mut target = 0.0;
                for j in 0..k {
                    let value: f64 = rng.sample(StandardNormal);
                    x[[row, j]] = value;
                    target += weights[j] * value;
                }
                // Duplicates are grouped after the originals: columns
                // k + source*duplicates + copy.
                for source in 0..k {
                    for copy in 0..spec.duplicates {
                        let fresh: f64 = rng.sample(StandardNormal);
                        let column = k + source * spec.duplicates + copy;
                        x[[row, column]] = rho * x[[row, source]] + mix * fresh;
                    }
                }
                for extra in 0..spec.noise {
                    let column = k * (1 + spec.duplicates) + extra;
                    x[[row, column]] = rng.sample(StandardNormal);
                }
                let jitter: f64 = rng.sample(StandardNormal);
                y[row] = target + 0.05 * jitter;
            }
            informative = (0..k).collect();
        }
        SynthKind::Separable => {
            let k = spec.informative;
            let offset = 1.5;
            for row in 0..n {
                let class = (row % 2) as f64;
                let sign = 2.0 * class - 1.0;
                for j in 0..p {
                    let spread: f64 = rng.sample(StandardNormal);
                    x[[row, j]] = if j < k {
                        sign * offset + 0.5 * spread
                    } else {
                        spread
                    };
                }
                y[row] = class;
            }
            informative = (0..k).collect();
        }
    }

    let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    let dataset = TabularDataset::from_parts(&spec.name(), x, y, spec.task(), Some(names))?;
    let metadata = SynthMetadata {
        name: spec.name(),
        kind: spec.kind,
        task: spec.task(),
        informative,
        n_features: p,
        n_samples: n,
        seed: spec.seed,
    };
    Ok((dataset, metadata))
}

/// Write any dataset as CSV: the feature columns under their names, then a
/// final `label` column. Values print in shortest-round-trip form, so a
/// reload reproduces them bit for bit.
pub fn write_csv(dataset: &TabularDataset, csv_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv_path).map_err(|e| BenchError::Io {
        path: csv_path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    header.push("label".to_string());
    writer
        .write_record(&header)
        .and_then(|()| {
            let features = dataset.features();
            for (row, &label) in dataset.labels().iter().enumerate() {
                let mut record: Vec<String> =
                    features.row(row).iter().map(|v| v.to_string()).collect();
                record.push(label.to_string());
                writer.write_record(&record)?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| BenchError::Io {
            path: csv_path.to_path_buf(),
            source: std::io::Error::other(e),
        })
}

/// Write the dataset as CSV plus the metadata as a JSON sidecar.
pub fn save_dataset(
    dataset: &TabularDataset,
    metadata: &SynthMetadata,
    csv_path: &Path,
    meta_path: &Path,
) -> Result<()> {
    write_csv(dataset, csv_path)?;
    let body = serde_json::to_string_pretty(metadata)?;
    fs::write(meta_path, body).map_err(|source| BenchError::Io {
        path: meta_path.to_path_buf(),
        source,
    })
}

/// Load a dataset saved by [`save_dataset`].
pub fn load_dataset(csv_path: &Path, meta_path: &Path) -> Result<(TabularDataset, SynthMetadata)> {
    let body = fs::read_to_string(meta_path).map_err(|source| BenchError::Io {
        path: meta_path.to_path_buf(),
        source,
    })?;
    let metadata: SynthMetadata = serde_json::from_str(&body)?;
    let dataset = TabularDataset::load_csv(csv_path, "label", metadata.task)?;
    Ok((dataset, metadata))
}
