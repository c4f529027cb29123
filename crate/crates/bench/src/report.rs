//! Benchmark report: one row per method, every row scored through the same
//! held-out evaluation path, plus an environment fingerprint and the full
//! config snapshot for reproducibility.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{BenchError, Result};

/// Where the report came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentFingerprint {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl EnvironmentFingerprint {
    pub fn current() -> Self {
        EnvironmentFingerprint {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

/// One method's result: the subset it chose, the held-out score of that
/// subset, and its normalized redundancy scaled so the full set reads 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub subset_size: usize,
    pub subset: Vec<usize>,
    pub score_b: f64,
    pub redundancy_x100: f64,
    pub wall_time_ms: u64,
}

/// The complete benchmark record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub environment: EnvironmentFingerprint,
    pub config: PipelineConfig,
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn new(config: PipelineConfig, rows: Vec<ReportRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(BenchError::EmptyReport);
        }
        Ok(BenchmarkReport {
            environment: EnvironmentFingerprint::current(),
            config,
            rows,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self.rows.is_empty() {
            return Err(BenchError::EmptyReport);
        }
        let body = serde_json::to_string_pretty(self)?;
        fs::write(path, body).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&body)?)
    }

    /// Aligned plain-text table of the rows.
    pub fn text_table(&self) -> String {
        let headers = ["method", "size", "score_b", "redundancy_x100", "wall_ms", "subset"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|row| {
                let subset = row
                    .subset
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                [
                    row.method.clone(),
                    row.subset_size.to_string(),
                    format!("{:.6}", row.score_b),
                    format!("{:.2}", row.redundancy_x100),
                    row.wall_time_ms.to_string(),
                    format!("{{{subset}}}"),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
        for row in &cells {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        let render = |out: &mut String, cols: &[String]| {
            let line: Vec<String> = cols
                .iter()
                .enumerate()
                .map(|(i, cell)| {
                    if i == 0 || i == 5 {
                        format!("{cell:<width$}", width = widths[i])
                    } else {
                        format!("{cell:>width$}", width = widths[i])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        };
        let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        render(&mut out, &header_cells);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        render(&mut out, &rule);
        for row in &cells {
            render(&mut out, row);
        }
        out
    }

    /// Canonical single-line JSON with everything run-location- or
    /// timing-dependent normalized away: wall times zeroed and the output
    /// directory blanked. Two runs of the same config must produce
    /// byte-identical views.
    pub fn determinism_view(&self) -> Result<String> {
        let mut clone = self.clone();
        for row in &mut clone.rows {
            row.wall_time_ms = 0;
        }
        clone.config.output_dir = std::path::PathBuf::new();
        Ok(serde_json::to_string(&clone)?)
    }
}
