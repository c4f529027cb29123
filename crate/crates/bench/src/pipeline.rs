//! Stage orchestration: dataset → redundancy matrix → collection → corpus →
//! training → search → report, with every stage persisting its artifact plus
//! a manifest embedding the SHA-256 of the artifact and of its upstream
//! input. `run_benchmark` chains the stages, verifies the hash chain, and
//! emits the benchmark report and plots. One pipeline run owns its output
//! directory exclusively through a lock file.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fsns_collect::{build_corpus, run_collection, CollectionLog, TokenCorpus};
use fsns_core::{
    build_matrix, evaluate_subset, normalize_redundancy, split_ab, subset_redundancy, DataSplit,
    FeatureSubset, ForestConfig, RandomForest, RedundancyMatrix, TabularDataset, Task,
};
use fsns_model::{load_checkpoint, search, train, SearchResult, SubsetEmbeddingModel, TrainReport};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{run_baseline, BaselineMethod, BaselineSpec};
use crate::config::{DatasetSource, PipelineConfig};
use crate::error::{BenchError, Result};
use crate::plot;
use crate::report::{BenchmarkReport, ReportRow};
use crate::synth::{self, SynthSpec};

/// File layout of one pipeline output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn config_snapshot(&self) -> PathBuf {
        self.file("config.toml")
    }
    pub fn dataset_csv(&self) -> PathBuf {
        self.file("dataset.csv")
    }
    pub fn dataset_meta(&self) -> PathBuf {
        self.file("dataset.meta.json")
    }
    pub fn matrix_file(&self) -> PathBuf {
        self.file("matrix.json")
    }
    pub fn log_records(&self) -> PathBuf {
        self.file("log.jsonl")
    }
    pub fn log_meta(&self) -> PathBuf {
        self.file("log.meta.json")
    }
    pub fn corpus_records(&self) -> PathBuf {
        self.file("corpus.jsonl")
    }
    pub fn corpus_header(&self) -> PathBuf {
        self.file("corpus.header.json")
    }
    pub fn model_file(&self) -> PathBuf {
        self.file("model.json")
    }
    pub fn history_file(&self) -> PathBuf {
        self.file("history.json")
    }
    pub fn search_file(&self) -> PathBuf {
        self.file("search.json")
    }
    pub fn report_json(&self) -> PathBuf {
        self.file("report.json")
    }
    pub fn report_text(&self) -> PathBuf {
        self.file("report.txt")
    }
    pub fn plots_dir(&self) -> PathBuf {
        self.file("plots")
    }
    pub fn lock_file(&self) -> PathBuf {
        self.file("pipeline.lock")
    }
    pub fn manifest_file(&self, stage: &str) -> PathBuf {
        self.file(&format!("{stage}.stage.json"))
    }

    pub fn ensure_dirs(&self) -> Result<()> {
        for dir in [self.root.clone(), self.plots_dir()] {
            fs::create_dir_all(&dir).map_err(|source| BenchError::Io { path: dir.clone(), source })?;
        }
        Ok(())
    }
}

/// Exclusive ownership of an output directory for the lifetime of the guard.
/// The lock file is removed on drop, so a finished (or panicked and unwound)
/// run releases the directory.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(workspace: &Workspace) -> Result<DirLock> {
        let path = workspace.lock_file();
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(BenchError::DirectoryLocked {
                    path: workspace.root().to_path_buf(),
                    lock: path,
                })
            }
            Err(source) => Err(BenchError::Io { path, source }),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Stage names in pipeline order; `verify_chain` walks these.
pub const STAGE_ORDER: [&str; 6] = ["dataset", "matrix", "collect", "corpus", "train", "search"];

/// Hash reference to the file a stage consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamRef {
    pub file: String,
    pub sha256: String,
}

/// Per-stage sidecar: which artifact the stage wrote, its hash, the hash of
/// its upstream artifact, and how long the stage took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub artifact: String,
    pub sha256: String,
    pub upstream: Option<UpstreamRef>,
    pub elapsed_ms: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_manifest(
    workspace: &Workspace,
    stage: &str,
    artifact: &Path,
    upstream: Option<&Path>,
    elapsed_ms: u64,
) -> Result<()> {
    let upstream = match upstream {
        Some(path) => Some(UpstreamRef {
            file: file_name(path),
            sha256: sha256_file(path)?,
        }),
        None => None,
    };
    let manifest = StageManifest {
        stage: stage.to_string(),
        artifact: file_name(artifact),
        sha256: sha256_file(artifact)?,
        upstream,
        elapsed_ms,
    };
    let path = workspace.manifest_file(stage);
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, body).map_err(|source| BenchError::Io { path, source })
}

fn read_manifest(workspace: &Workspace, stage: &str) -> Result<Option<StageManifest>> {
    let path = workspace.manifest_file(stage);
    if !path.is_file() {
        return Ok(None);
    }
    let body = fs::read_to_string(&path).map_err(|source| BenchError::Io { path, source })?;
    Ok(Some(serde_json::from_str(&body)?))
}

/// Recompute every present stage's artifact hash (and its recorded upstream
/// hash) and compare against the manifests.
pub fn verify_chain(workspace: &Workspace) -> Result<()> {
    for stage in STAGE_ORDER {
        let Some(manifest) = read_manifest(workspace, stage)? else {
            continue;
        };
        let artifact = workspace.file(&manifest.artifact);
        let actual = sha256_file(&artifact)?;
        if actual != manifest.sha256 {
            return Err(BenchError::BrokenChain {
                artifact: artifact.display().to_string(),
                stored: manifest.sha256,
                actual,
            });
        }
        if let Some(upstream) = manifest.upstream {
            let upstream_path = workspace.file(&upstream.file);
            let actual = sha256_file(&upstream_path)?;
            if actual != upstream.sha256 {
                return Err(BenchError::BrokenChain {
                    artifact: upstream_path.display().to_string(),
                    stored: upstream.sha256,
                    actual,
                });
            }
        }
    }
    Ok(())
}

/// Wall-clock durations of the heavy stages, read back from the manifests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub collect_ms: u64,
    pub train_ms: u64,
    pub search_ms: u64,
}

pub fn read_timings(workspace: &Workspace) -> Result<StageTimings> {
    let grab = |stage: &str| -> Result<u64> {
        Ok(read_manifest(workspace, stage)?.map_or(0, |m| m.elapsed_ms))
    };
    Ok(StageTimings {
        collect_ms: grab("collect")?,
        train_ms: grab("train")?,
        search_ms: grab("search")?,
    })
}

/// Dataset sidecar written next to the materialized CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub task: Task,
    pub n_features: usize,
    pub n_samples: usize,
    /// Ground-truth informative columns, present for synthetic datasets.
    pub informative: Option<Vec<usize>>,
    /// The generating spec, present for synthetic datasets.
    pub synthetic: Option<SynthSpec>,
}

/// Materialize the configured dataset into the workspace: a canonical CSV
/// (the chain anchor), a metadata sidecar, and the stage manifest.
pub fn stage_dataset(
    config: &PipelineConfig,
    workspace: &Workspace,
) -> Result<(TabularDataset, DatasetMeta)> {
    let started = Instant::now();
    let (dataset, meta) = match &config.dataset {
        DatasetSource::Synthetic(spec) => {
            let (dataset, generated) = synth::generate(spec)?;
            let meta = DatasetMeta {
                name: generated.name,
                task: generated.task,
                n_features: generated.n_features,
                n_samples: generated.n_samples,
                informative: Some(generated.informative),
                synthetic: Some(spec.clone()),
            };
            (dataset, meta)
        }
        DatasetSource::Path(source) => {
            let dataset =
                TabularDataset::load_csv(&source.path, &source.label_column, source.task)?;
            let meta = DatasetMeta {
                name: dataset.name().to_string(),
                task: source.task,
                n_features: dataset.n_features(),
                n_samples: dataset.n_samples(),
                informative: None,
                synthetic: None,
            };
            (dataset, meta)
        }
    };
    synth::write_csv(&dataset, &workspace.dataset_csv())?;
    let meta_path = workspace.dataset_meta();
    let body = serde_json::to_string_pretty(&meta)?;
    fs::write(&meta_path, body).map_err(|source| BenchError::Io {
        path: meta_path,
        source,
    })?;
    write_manifest(
        workspace,
        "dataset",
        &workspace.dataset_csv(),
        None,
        started.elapsed().as_millis() as u64,
    )?;
    Ok((dataset, meta))
}

/// The train/test partition is derived (seeded), not persisted.
pub fn stage_split(config: &PipelineConfig, dataset: &TabularDataset) -> Result<DataSplit> {
    Ok(split_ab(dataset, config.split.test_fraction, config.split.seed)?)
}

pub fn stage_matrix(
    config: &PipelineConfig,
    workspace: &Workspace,
    dataset: &TabularDataset,
) -> Result<RedundancyMatrix> {
    let started = Instant::now();
    let matrix = build_matrix(dataset, config.collect.metric, None)?;
    matrix.save(workspace.matrix_file())?;
    write_manifest(
        workspace,
        "matrix",
        &workspace.matrix_file(),
        Some(&workspace.dataset_csv()),
        started.elapsed().as_millis() as u64,
    )?;
    Ok(matrix)
}

pub fn stage_collect(
    config: &PipelineConfig,
    workspace: &Workspace,
    dataset: &TabularDataset,
    split: &DataSplit,
    matrix: &RedundancyMatrix,
) -> Result<CollectionLog> {
    let started = Instant::now();
    let log = run_collection(
        dataset,
        split,
        config.collect.episodes,
        config.collect.steps_per_episode,
        config.collect.channel,
        matrix,
        &config.collect.collector,
    )?;
    let elapsed = started.elapsed().as_millis() as u64;
    log.save(workspace.log_records(), workspace.log_meta())?;
    write_manifest(
        workspace,
        "collect",
        &workspace.log_records(),
        Some(&workspace.matrix_file()),
        elapsed,
    )?;
    Ok(log)
}

pub fn stage_corpus(
    config: &PipelineConfig,
    workspace: &Workspace,
    log: &CollectionLog,
) -> Result<TokenCorpus> {
    let started = Instant::now();
    let corpus = build_corpus(log, config.collect.copies, config.collect.collector.seed)?;
    corpus.save(workspace.corpus_records(), workspace.corpus_header())?;
    write_manifest(
        workspace,
        "corpus",
        &workspace.corpus_records(),
        Some(&workspace.log_records()),
        started.elapsed().as_millis() as u64,
    )?;
    Ok(corpus)
}

pub fn stage_train(
    config: &PipelineConfig,
    workspace: &Workspace,
    corpus: &TokenCorpus,
) -> Result<(SubsetEmbeddingModel, TrainReport)> {
    let started = Instant::now();
    let mut model = SubsetEmbeddingModel::new(
        config.effective_model(),
        corpus.vocabulary.n_features,
        corpus.max_sequence_length,
    )?;
    let model_path = workspace.model_file();
    let report = train(&mut model, corpus, Some(&model_path))?;
    let elapsed = started.elapsed().as_millis() as u64;
    let history_path = workspace.history_file();
    let body = serde_json::to_string_pretty(&report)?;
    fs::write(&history_path, body).map_err(|source| BenchError::Io {
        path: history_path,
        source,
    })?;
    write_manifest(
        workspace,
        "train",
        &model_path,
        Some(&workspace.corpus_records()),
        elapsed,
    )?;
    Ok((model, report))
}

pub fn stage_search(
    config: &PipelineConfig,
    workspace: &Workspace,
    model: &SubsetEmbeddingModel,
    corpus: &TokenCorpus,
    dataset: &TabularDataset,
    split: &DataSplit,
) -> Result<SearchResult> {
    let started = Instant::now();
    let mut result = search(model, corpus, &config.effective_search())?;
    let eval_seed = config.split.seed;
    if config.search.rerank_ground_truth {
        // Score every decoded candidate on the held-out rows and let the
        // measurement, not the predicted scores, pick the winner.
        let mut best: Option<(usize, f64)> = None;
        let mut measured = Vec::with_capacity(result.candidates.len());
        for (index, candidate) in result.candidates.iter().enumerate() {
            let score = evaluate_subset(dataset, split, &candidate.subset, eval_seed)?;
            measured.push(score);
            let better = match best {
                None => true,
                Some((_, incumbent)) => score > incumbent,
            };
            if better {
                best = Some((index, score));
            }
        }
        if let Some((index, score)) = best {
            let winner = result.candidates[index].clone();
            result.best_embedding = winner.embedding;
            result.subset = winner.subset;
            result.v_hat = winner.v_hat;
            result.u_hat = winner.u_hat;
            result.ground_truth = Some(score);
        }
    } else {
        result.ground_truth = Some(evaluate_subset(dataset, split, &result.subset, eval_seed)?);
    }
    let elapsed = started.elapsed().as_millis() as u64;
    let search_path = workspace.search_file();
    let body = serde_json::to_string_pretty(&result)?;
    fs::write(&search_path, body).map_err(|source| BenchError::Io {
        path: search_path,
        source,
    })?;
    write_manifest(
        workspace,
        "search",
        &workspace.search_file(),
        Some(&workspace.model_file()),
        elapsed,
    )?;
    Ok(result)
}

/// Normalized subset redundancy on a 0–100 scale where the full feature set
/// reads exactly 100. A degenerate matrix whose full-set redundancy is zero
/// makes every subset read zero.
pub fn redundancy_percent(matrix: &RedundancyMatrix, subset: &FeatureSubset) -> Result<f64> {
    let full = FeatureSubset::full(matrix.n_features);
    let full_raw = subset_redundancy(matrix, &full)?;
    if full_raw <= 0.0 {
        return Ok(0.0);
    }
    if subset.sorted_indices() == full.sorted_indices() {
        return Ok(100.0);
    }
    let raw = subset_redundancy(matrix, subset)?;
    Ok(normalize_redundancy(raw, full_raw)? * 100.0)
}

/// Build the per-method comparison: the original full set, the
/// pipeline-selected subset, and the four baselines, every row scored
/// through the same held-out evaluation call.
pub fn stage_report(
    config: &PipelineConfig,
    workspace: &Workspace,
    dataset: &TabularDataset,
    split: &DataSplit,
    matrix: &RedundancyMatrix,
    search_result: &SearchResult,
    timings: StageTimings,
) -> Result<BenchmarkReport> {
    let eval_seed = config.split.seed;
    let mut rows = Vec::with_capacity(6);

    let score_of = |subset: &FeatureSubset| -> Result<f64> {
        Ok(evaluate_subset(dataset, split, subset, eval_seed)?)
    };
    let row = |method: &str, subset: &FeatureSubset, wall_time_ms: u64| -> Result<ReportRow> {
        Ok(ReportRow {
            method: method.to_string(),
            subset_size: subset.len(),
            subset: subset.sorted_indices(),
            score_b: score_of(subset)?,
            redundancy_x100: redundancy_percent(matrix, subset)?,
            wall_time_ms,
        })
    };

    let full = FeatureSubset::full(dataset.n_features());
    rows.push(row("original", &full, 0)?);

    let fsns_time = timings.collect_ms + timings.train_ms + timings.search_ms;
    rows.push(row("fsns", &search_result.subset, fsns_time)?);

    let k = config
        .baselines
        .k
        .unwrap_or_else(|| search_result.subset.len())
        .clamp(1, dataset.n_features());
    for method in [
        BaselineMethod::KBest,
        BaselineMethod::Mrmr,
        BaselineMethod::Lasso,
        BaselineMethod::Rfe,
    ] {
        let spec = BaselineSpec {
            method,
            k,
            rfe_step: config.baselines.rfe_step,
        };
        let started = Instant::now();
        let outcome = run_baseline(&spec, dataset, split, matrix, eval_seed)?;
        let elapsed = started.elapsed().as_millis() as u64;
        let label = if outcome.fallback {
            format!("{method} (fallback)")
        } else {
            method.to_string()
        };
        rows.push(row(&label, &outcome.subset, elapsed)?);
    }

    let report = BenchmarkReport::new(config.clone(), rows)?;
    report.save(&workspace.report_json())?;
    let text_path = workspace.report_text();
    fs::write(&text_path, report.text_table()).map_err(|source| BenchError::Io {
        path: text_path,
        source,
    })?;
    Ok(report)
}

/// Emit the three plot files: loss curves, search trajectories, and
/// importance bars for the selected subset.
pub fn stage_plots(
    config: &PipelineConfig,
    workspace: &Workspace,
    history: &TrainReport,
    search_result: &SearchResult,
    dataset: &TabularDataset,
    split: &DataSplit,
) -> Result<()> {
    let dir = workspace.plots_dir();
    fs::create_dir_all(&dir).map_err(|source| BenchError::Io {
        path: dir.clone(),
        source,
    })?;
    let write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| BenchError::Io { path, source })
    };
    write("loss_curves.svg", plot::loss_curves_svg(&history.history))?;
    write(
        "search_trajectories.svg",
        plot::trajectories_svg(&search_result.trajectories),
    )?;

    let columns = search_result.subset.sorted_indices();
    let rows = &split.train_indices;
    let mut x = Array2::<f64>::zeros((rows.len(), columns.len()));
    for (col, &feature) in columns.iter().enumerate() {
        let full_column = dataset.column(feature);
        for (row, &i) in rows.iter().enumerate() {
            x[[row, col]] = full_column[i];
        }
    }
    let labels: Vec<f64> = rows.iter().map(|&i| dataset.labels()[i]).collect();
    let forest = RandomForest::fit(
        x.view(),
        &labels,
        dataset.task(),
        dataset.n_classes(),
        &ForestConfig::with_seed(config.split.seed),
    );
    let names: Vec<String> = columns
        .iter()
        .map(|&i| dataset.feature_names()[i].clone())
        .collect();
    write(
        "feature_importance.svg",
        plot::importance_bars_svg(&names, forest.feature_importances()),
    )
}

/// Everything a full benchmark run produced, in memory.
pub struct PipelineOutcome {
    pub config: PipelineConfig,
    pub dataset: TabularDataset,
    pub meta: DatasetMeta,
    pub split: DataSplit,
    pub matrix: RedundancyMatrix,
    pub log: CollectionLog,
    pub corpus: TokenCorpus,
    pub model: SubsetEmbeddingModel,
    pub train_report: TrainReport,
    pub search: SearchResult,
    pub report: BenchmarkReport,
    pub timings: StageTimings,
}

/// Run every stage in order into the config's output directory, verify the
/// artifact hash chain, and emit the report and plots.
pub fn run_benchmark(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let workspace = Workspace::new(&config.output_dir);
    workspace.ensure_dirs()?;
    let _lock = DirLock::acquire(&workspace)?;
    let snapshot_path = workspace.config_snapshot();
    fs::write(&snapshot_path, config.to_toml()?).map_err(|source| BenchError::Io {
        path: snapshot_path,
        source,
    })?;

    let (dataset, meta) = stage_dataset(config, &workspace)?;
    let split = stage_split(config, &dataset)?;
    let matrix = stage_matrix(config, &workspace, &dataset)?;
    let log = stage_collect(config, &workspace, &dataset, &split, &matrix)?;
    let corpus = stage_corpus(config, &workspace, &log)?;
    let (model, train_report) = stage_train(config, &workspace, &corpus)?;
    let search_result = stage_search(config, &workspace, &model, &corpus, &dataset, &split)?;
    let timings = read_timings(&workspace)?;
    let report = stage_report(
        config,
        &workspace,
        &dataset,
        &split,
        &matrix,
        &search_result,
        timings,
    )?;
    stage_plots(config, &workspace, &train_report, &search_result, &dataset, &split)?;
    verify_chain(&workspace)?;

    Ok(PipelineOutcome {
        config: config.clone(),
        dataset,
        meta,
        split,
        matrix,
        log,
        corpus,
        model,
        train_report,
        search: search_result,
        report,
        timings,
    })
}

// --- Disk loaders for stage commands that start from an existing workspace ---

pub fn load_dataset_artifact(workspace: &Workspace) -> Result<(TabularDataset, DatasetMeta)> {
    let csv_path = workspace.dataset_csv();
    let meta_path = workspace.dataset_meta();
    if !csv_path.is_file() || !meta_path.is_file() {
        return Err(BenchError::MissingArtifact {
            path: csv_path,
            producer: "synth",
        });
    }
    let body = fs::read_to_string(&meta_path).map_err(|source| BenchError::Io {
        path: meta_path,
        source,
    })?;
    let meta: DatasetMeta = serde_json::from_str(&body)?;
    let dataset = TabularDataset::load_csv(&csv_path, "label", meta.task)?;
    Ok((dataset, meta))
}

pub fn load_matrix_artifact(workspace: &Workspace) -> Result<RedundancyMatrix> {
    let path = workspace.matrix_file();
    if !path.is_file() {
        return Err(BenchError::MissingArtifact {
            path,
            producer: "collect",
        });
    }
    Ok(RedundancyMatrix::load(path)?)
}

pub fn load_corpus_artifact(workspace: &Workspace) -> Result<TokenCorpus> {
    let records = workspace.corpus_records();
    let header = workspace.corpus_header();
    if !records.is_file() || !header.is_file() {
        return Err(BenchError::MissingArtifact {
            path: records,
            producer: "collect",
        });
    }
    Ok(TokenCorpus::load(records, header)?)
}

pub fn load_model_artifact(workspace: &Workspace) -> Result<SubsetEmbeddingModel> {
    let path = workspace.model_file();
    if !path.is_file() {
        return Err(BenchError::MissingArtifact {
            path,
            producer: "train",
        });
    }
    Ok(load_checkpoint(&path)?)
}

pub fn load_history_artifact(workspace: &Workspace) -> Result<TrainReport> {
    let path = workspace.history_file();
    if !path.is_file() {
        return Err(BenchError::MissingArtifact {
            path,
            producer: "train",
        });
    }
    let body = fs::read_to_string(&path).map_err(|source| BenchError::Io { path, source })?;
    Ok(serde_json::from_str(&body)?)
}

pub fn load_search_artifact(workspace: &Workspace) -> Result<SearchResult> {
    let path = workspace.search_file();
    if !path.is_file() {
        return Err(BenchError::MissingArtifact {
            path,
            producer: "search",
        });
    }
    let body = fs::read_to_string(&path).map_err(|source| BenchError::Io { path, source })?;
    Ok(serde_json::from_str(&body)?)
}
