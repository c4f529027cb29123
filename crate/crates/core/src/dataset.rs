//! Tabular dataset container and CSV ingestion.
//!
//! A dataset is a dense sample-major feature matrix plus a label vector.
//! Classification labels are stored as class ids `0..n_classes`; regression
//! labels are raw reals. CSV ingestion drops rows with missing cells and
//! integer-encodes categorical feature columns.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{CoreError, Result};

/// Minimum feature count a dataset must carry.
pub const MIN_FEATURES: usize = 2;
/// Minimum sample count a dataset must carry after dropping unusable rows.
pub const MIN_SAMPLES: usize = 10;

/// Learning task the labels describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Classification => write!(f, "classification"),
            Task::Regression => write!(f, "regression"),
        }
    }
}

/// Dense tabular dataset: features are sample-major, labels task-dependent.
#[derive(Debug, Clone)]
pub struct TabularDataset {
    name: String,
    features: Array2<f64>,
    feature_names: Vec<String>,
    labels: Vec<f64>,
    task: Task,
    n_classes: usize,
    dropped_rows: usize,
}

impl TabularDataset {
    /// Builds a dataset from an in-memory matrix, validating shape and labels.
    pub fn from_parts(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<f64>,
        task: Task,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n_samples, n_features) = features.dim();
        if n_features < MIN_FEATURES {
            return Err(CoreError::DatasetTooSmall {
                what: "features",
                min: MIN_FEATURES,
                got: n_features,
            });
        }
        if n_samples < MIN_SAMPLES {
            return Err(CoreError::DatasetTooSmall {
                what: "samples",
                min: MIN_SAMPLES,
                got: n_samples,
            });
        }
        if labels.len() != n_samples {
            return Err(CoreError::LengthMismatch {
                left: n_samples,
                right: labels.len(),
            });
        }
        let n_classes = match task {
            Task::Regression => 0,
            Task::Classification => {
                let mut max_class = 0usize;
                for &y in &labels {
                    if y < 0.0 || y.fract() != 0.0 || !y.is_finite() {
                        return Err(CoreError::BadClassLabel(y));
                    }
                    max_class = max_class.max(y as usize);
                }
                max_class + 1
            }
        };
        let feature_names = match feature_names {
            Some(names) => {
                if names.len() != n_features {
                    return Err(CoreError::LengthMismatch {
                        left: n_features,
                        right: names.len(),
                    });
                }
                names
            }
            None => (0..n_features).map(|i| format!("f{i}")).collect(),
        };
        Ok(Self {
            name: name.into(),
            features,
            feature_names,
            labels,
            task,
            n_classes,
            dropped_rows: 0,
        })
    }

    /// Loads a CSV file with a header row.
    ///
    /// Rows containing a missing cell (empty, `na`, `nan`, `null`, or `?`)
    /// are dropped and counted. Feature columns whose remaining cells all
    /// parse as numbers stay numeric; any other column is integer-encoded
    /// over its sorted distinct values. Classification labels are encoded
    /// the same way; regression labels must parse as numbers.
    pub fn load_csv(path: impl AsRef<Path>, label_column: &str, task: Task) -> Result<Self> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let raw = std::fs::read_to_string(path).map_err(|source| CoreError::Io {
            path: path_str.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(raw.as_bytes());

        let headers: Vec<String> = reader
            .headers()
            .map_err(|source| CoreError::Csv {
                path: path_str.clone(),
                source,
            })?
            .iter()
            .map(|h| h.to_string())
            .collect();
        let label_idx = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| CoreError::MissingLabelColumn {
                name: label_column.to_string(),
                available: headers.clone(),
            })?;

        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut dropped = 0usize;
        for record in reader.records() {
            let record = record.map_err(|source| CoreError::Csv {
                path: path_str.clone(),
                source,
            })?;
            let cells: Vec<String> = record.iter().map(|c| c.to_string()).collect();
            if cells.len() != headers.len() || cells.iter().any(|c| is_missing(c)) {
                dropped += 1;
                continue;
            }
            rows.push(cells);
        }
        if rows.is_empty() {
            return Err(CoreError::NoUsableRows);
        }

        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_idx).collect();
        let n_samples = rows.len();
        let n_features = feature_cols.len();

        let mut features = Array2::zeros((n_samples, n_features));
        for (out_col, &col) in feature_cols.iter().enumerate() {
            let numeric: Option<Vec<f64>> = rows
                .iter()
                .map(|r| r[col].parse::<f64>().ok())
                .collect();
            match numeric {
                Some(values) => {
                    for (i, v) in values.into_iter().enumerate() {
                        features[[i, out_col]] = v;
                    }
                }
                None => {
                    let codes = encode_categories(rows.iter().map(|r| r[col].as_str()));
                    for (i, v) in codes.into_iter().enumerate() {
                        features[[i, out_col]] = v;
                    }
                }
            }
        }

        let labels: Vec<f64> = match task {
            Task::Regression => {
                let mut out = Vec::with_capacity(n_samples);
                for (i, row) in rows.iter().enumerate() {
                    let cell = &row[label_idx];
                    let v = cell.parse::<f64>().map_err(|_| CoreError::NonNumericLabel {
                        row: i,
                        value: cell.clone(),
                    })?;
                    out.push(v);
                }
                out
            }
            Task::Classification => encode_categories(rows.iter().map(|r| r[label_idx].as_str())),
        };

        let feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());

        let mut ds = Self::from_parts(name, features, labels, task, Some(feature_names))?;
        ds.dropped_rows = dropped;
        Ok(ds)
    }

    /// Derives a dataset restricted to the given rows (used to confine a
    /// method to one side of a split). Row order follows `rows`.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(CoreError::NoUsableRows);
        }
        for &r in rows {
            if r >= self.n_samples() {
                return Err(CoreError::FeatureOutOfRange {
                    index: r,
                    n_features: self.n_samples(),
                });
            }
        }
        let n_features = self.n_features();
        let mut features = Array2::zeros((rows.len(), n_features));
        let mut labels = Vec::with_capacity(rows.len());
        for (i, &r) in rows.iter().enumerate() {
            features.row_mut(i).assign(&self.features.row(r));
            labels.push(self.labels[r]);
        }
        Ok(Self {
            name: self.name.clone(),
            features,
            feature_names: self.feature_names.clone(),
            labels,
            task: self.task,
            n_classes: self.n_classes,
            dropped_rows: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.column(j)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Number of classes for classification; 0 for regression.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Rows dropped during CSV ingestion because of missing values.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("null")
        || t == "?"
}

/// Maps each value to the rank of its string in the sorted distinct set.
fn encode_categories<'a>(values: impl Iterator<Item = &'a str> + Clone) -> Vec<f64> {
    let mut distinct: Vec<&str> = values.clone().collect();
    distinct.sort_unstable();
    distinct.dedup();
    values
        .map(|v| distinct.binary_search(&v).expect("value seen above") as f64)
        .collect()
}
