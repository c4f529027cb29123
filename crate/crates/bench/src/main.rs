//! `fsns` — feature selection by neuro-symbolic search.
//!
//! Subcommands mirror the pipeline stages: `synth` materializes a dataset,
//! `collect` gathers scored subsets, `train` fits the embedding model,
//! `search` runs the latent ascent, `evaluate` builds the comparison report,
//! and `benchmark` chains everything. Every command takes `--config` plus
//! individual overrides; later stages insist on finding the earlier stages'
//! artifacts in the output directory.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fsns_bench::config::{
    DatasetSource, PathSource, PipelineConfig, Profile,
};
use fsns_bench::error::{BenchError, Result};
use fsns_bench::pipeline::{
    self, read_timings, verify_chain, DirLock, Workspace,
};
use fsns_bench::synth::{SynthKind, SynthSpec};
use fsns_collect::Channel;
use fsns_core::{RedundancyMetric, Task};

#[derive(Parser)]
#[command(
    name = "fsns",
    about = "Feature selection via neuro-symbolic subset embeddings",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset into the output directory.
    Synth(StageArgs),
    /// Explore subsets and collect (subset, performance, redundancy) records.
    Collect(StageArgs),
    /// Train the subset-embedding model on the collected corpus.
    Train(StageArgs),
    /// Run gradient search in the trained latent space and decode a subset.
    Search(StageArgs),
    /// Score the selected subset against the baselines and emit the report.
    Evaluate(StageArgs),
    /// Run every stage end to end and emit the full report with plots.
    Benchmark(StageArgs),
}

/// Flags shared by every stage command. Anything left unset falls back to
/// the config file, which itself falls back to the published defaults.
#[derive(Args)]
struct StageArgs {
    /// TOML pipeline config; optional if dataset flags are given instead.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory owning this run's artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Master seed fanned out across split/collect/train/search seeds.
    #[arg(long)]
    seed: Option<u64>,

    /// Run-size profile: `full` (research-scale defaults) or `desk`.
    #[arg(long)]
    profile: Option<String>,

    // --- dataset flags (alternative to a config file) ---
    /// Synthetic dataset kind: noise, redundant, separable.
    #[arg(long)]
    kind: Option<String>,
    /// Number of informative features for a synthetic dataset.
    #[arg(long)]
    informative: Option<usize>,
    /// Number of pure-noise features for a synthetic dataset.
    #[arg(long)]
    noise: Option<usize>,
    /// Sample count for a synthetic dataset.
    #[arg(long)]
    samples: Option<usize>,
    /// Generator seed for a synthetic dataset.
    #[arg(long)]
    dataset_seed: Option<u64>,
    /// Near-duplicates per informative feature (redundant kind).
    #[arg(long)]
    duplicates: Option<usize>,
    /// Duplicate correlation in [0, 1] (redundant kind).
    #[arg(long)]
    correlation: Option<f64>,
    /// CSV dataset path (alternative to a synthetic spec).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column name for --data.
    #[arg(long)]
    label_column: Option<String>,
    /// Task for --data: classification or regression.
    #[arg(long)]
    task: Option<String>,

    // --- split / collect overrides ---
    /// Held-out fraction of rows.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Collection episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Exploration steps per episode.
    #[arg(long)]
    steps_per_episode: Option<usize>,
    /// Performance channel: supervised or unsupervised.
    #[arg(long)]
    channel: Option<String>,
    /// Redundancy metric: mutual_information, covariance_abs, pearson_abs.
    #[arg(long)]
    metric: Option<String>,
    /// Shuffled copies per record during corpus augmentation.
    #[arg(long)]
    copies: Option<usize>,

    // --- model overrides ---
    /// Token embedding width.
    #[arg(long)]
    token_embedding_dim: Option<usize>,
    /// Latent embedding width.
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Attention heads per block.
    #[arg(long)]
    attention_heads: Option<usize>,
    /// Training batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Optimizer learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Stage-1 epochs (reconstruction-focused).
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    /// Stage-2 epochs (full loss).
    #[arg(long)]
    finetune_epochs: Option<usize>,

    // --- search / baseline overrides ---
    /// Redundancy trade-off λ in the latent ascent and ranking.
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of ascent starting points.
    #[arg(long)]
    n_starts: Option<usize>,
    /// Ascent steps per start.
    #[arg(long)]
    search_steps: Option<usize>,
    /// Re-rank decoded candidates by measured held-out score.
    #[arg(long)]
    rerank_ground_truth: Option<bool>,
    /// Baseline subset size (defaults to the selected subset's size).
    #[arg(long)]
    k: Option<usize>,
    /// Features dropped per elimination round.
    #[arg(long)]
    rfe_step: Option<usize>,
    /// Model redundancy awareness; false switches to the plain preset.
    #[arg(long)]
    redundancy: Option<bool>,
}

impl StageArgs {
    /// Build the effective config: file (or dataset flags) → profile →
    /// field overrides → master seed.
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => {
                let dataset = self.dataset_from_flags()?.ok_or_else(|| {
                    BenchError::BadConfig(
                        "no --config given and no dataset flags (--kind or --data) to build one"
                            .to_string(),
                    )
                })?;
                let mut config: PipelineConfig =
                    toml::from_str("[dataset.synthetic]\nkind = \"noise\"\ninformative = 2\nnoise = 0\nsamples = 10\n")
                        .expect("placeholder config parses");
                config.dataset = dataset;
                config
            }
        };
        if let Some(dataset) = self.dataset_from_flags()? {
            config.dataset = dataset;
        }
        if let Some(profile) = &self.profile {
            config.apply_profile(Profile::from_str(profile)?);
        }
        self.apply_overrides(&mut config)?;
        if let Some(seed) = self.seed {
            config.apply_master_seed(seed);
        }
        config.validate()?;
        Ok(config)
    }

    fn dataset_from_flags(&self) -> Result<Option<DatasetSource>> {
        if let Some(path) = &self.data {
            let task = match self.task.as_deref() {
                Some("classification") => Task::Classification,
                None => {
                    eprintln!("note: --task not given; treating `label` values as regression targets");
                    Task::Regression
                }
                Some("regression") => Task::Regression,
                Some(other) => {
                    return Err(BenchError::UnknownName {
                        what: "task",
                        got: other.to_string(),
                        expected: "classification, regression",
                    })
                }
            };
            return Ok(Some(DatasetSource::Path(PathSource {
                path: path.clone(),
                label_column: self
                    .label_column
                    .clone()
                    .unwrap_or_else(|| "label".to_string()),
                task,
            })));
        }
        let Some(kind) = &self.kind else {
            return Ok(None);
        };
        let kind = SynthKind::from_str(kind)?;
        let spec = SynthSpec {
            kind,
            informative: self.informative.unwrap_or(5),
            noise: self.noise.unwrap_or(0),
            samples: self.samples.unwrap_or(500),
            seed: self.dataset_seed.unwrap_or(0),
            duplicates: self.duplicates.unwrap_or(2),
            correlation: self.correlation.unwrap_or(1.0),
        };
        Ok(Some(DatasetSource::Synthetic(spec)))
    }

    fn apply_overrides(&self, config: &mut PipelineConfig) -> Result<()> {
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(fraction) = self.test_fraction {
            config.split.test_fraction = fraction;
        }
        if let Some(episodes) = self.episodes {
            config.collect.episodes = episodes;
        }
        if let Some(steps) = self.steps_per_episode {
            config.collect.steps_per_episode = steps;
        }
        if let Some(channel) = &self.channel {
            config.collect.channel = match channel.as_str() {
                "supervised" => Channel::Supervised,
                "unsupervised" => Channel::Unsupervised,
                other => {
                    return Err(BenchError::UnknownName {
                        what: "channel",
                        got: other.to_string(),
                        expected: "supervised, unsupervised",
                    })
                }
            };
        }
        if let Some(metric) = &self.metric {
            config.collect.metric = match metric.as_str() {
                "mutual_information" => RedundancyMetric::MutualInformation,
                "covariance_abs" => RedundancyMetric::CovarianceAbs,
                "pearson_abs" => RedundancyMetric::PearsonAbs,
                other => {
                    return Err(BenchError::UnknownName {
                        what: "redundancy metric",
                        got: other.to_string(),
                        expected: "mutual_information, covariance_abs, pearson_abs",
                    })
                }
            };
        }
        if let Some(copies) = self.copies {
            config.collect.copies = copies;
        }
        if let Some(dim) = self.token_embedding_dim {
            config.model.token_embedding_dim = dim;
        }
        if let Some(dim) = self.latent_dim {
            config.model.latent_dim = dim;
        }
        if let Some(heads) = self.attention_heads {
            config.model.attention_heads = heads;
        }
        if let Some(batch) = self.batch_size {
            config.model.batch_size = batch;
        }
        if let Some(rate) = self.learning_rate {
            config.model.learning_rate = rate;
        }
        if let Some(epochs) = self.pretrain_epochs {
            config.model.pretrain_epochs = epochs;
        }
        if let Some(epochs) = self.finetune_epochs {
            config.model.finetune_epochs = epochs;
        }
        if let Some(lambda) = self.lambda {
            config.search.lambda = lambda;
        }
        if let Some(n) = self.n_starts {
            config.search.n_starts = n;
        }
        if let Some(steps) = self.search_steps {
            config.search.steps = steps;
        }
        if let Some(rerank) = self.rerank_ground_truth {
            config.search.rerank_ground_truth = rerank;
        }
        if let Some(k) = self.k {
            config.baselines.k = Some(k);
        }
        if let Some(step) = self.rfe_step {
            config.baselines.rfe_step = step;
        }
        if let Some(redundancy) = self.redundancy {
            config.redundancy = redundancy;
        }
        Ok(())
    }
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::Synth(args) => {
            let config = args.resolve()?;
            let workspace = Workspace::new(&config.output_dir);
            workspace.ensure_dirs()?;
            let _lock = DirLock::acquire(&workspace)?;
            let (dataset, meta) = pipeline::stage_dataset(&config, &workspace)?;
            println!(
                "wrote {} ({} samples x {} features, {:?}) to {}",
                meta.name,
                dataset.n_samples(),
                dataset.n_features(),
                meta.task,
                workspace.dataset_csv().display()
            );
        }
        Command::Collect(args) => {
            let config = args.resolve()?;
            let workspace = Workspace::new(&config.output_dir);
            workspace.ensure_dirs()?;
            let _lock = DirLock::acquire(&workspace)?;
            let (dataset, _meta) = pipeline::stage_dataset(&config, &workspace)?;
            let split = pipeline::stage_split(&config, &dataset)?;
            let matrix = pipeline::stage_matrix(&config, &workspace, &dataset)?;
            let log = pipeline::stage_collect(&config, &workspace, &dataset, &split, &matrix)?;
            let corpus = pipeline::stage_corpus(&config, &workspace, &log)?;
            println!(
                "collected {} records over {} episodes -> corpus of {} sequences at {}",
                log.records.len(),
                log.episodes,
                corpus.records.len(),
                workspace.corpus_records().display()
            );
        }
        Command::Train(args) => {
            let config = args.resolve()?;
            let workspace = Workspace::new(&config.output_dir);
            workspace.ensure_dirs()?;
            let _lock = DirLock::acquire(&workspace)?;
            let corpus = pipeline::load_corpus_artifact(&workspace)?;
            let (_model, report) = pipeline::stage_train(&config, &workspace, &corpus)?;
            let last = report.history.last();
            println!(
                "trained {} epochs; final mean loss {:.6} -> {}",
                report.history.len(),
                last.map_or(f64::NAN, |e| e.total),
                workspace.model_file().display()
            );
        }
        Command::Search(args) => {
            let config = args.resolve()?;
            let workspace = Workspace::new(&config.output_dir);
            workspace.ensure_dirs()?;
            let _lock = DirLock::acquire(&workspace)?;
            let (dataset, _meta) = pipeline::load_dataset_artifact(&workspace)?;
            let split = pipeline::stage_split(&config, &dataset)?;
            let corpus = pipeline::load_corpus_artifact(&workspace)?;
            let model = pipeline::load_model_artifact(&workspace)?;
            let result =
                pipeline::stage_search(&config, &workspace, &model, &corpus, &dataset, &split)?;
            println!(
                "selected {:?} (predicted performance {:.4}, redundancy {:.4}; measured {:.4})",
                result.subset.sorted_indices(),
                result.v_hat,
                result.u_hat,
                result.ground_truth.unwrap_or(f64::NAN)
            );
        }
        Command::Evaluate(args) => {
            let config = args.resolve()?;
            let workspace = Workspace::new(&config.output_dir);
            workspace.ensure_dirs()?;
            let _lock = DirLock::acquire(&workspace)?;
            let (dataset, _meta) = pipeline::load_dataset_artifact(&workspace)?;
            let split = pipeline::stage_split(&config, &dataset)?;
            let matrix = pipeline::load_matrix_artifact(&workspace)?;
            let search_result = pipeline::load_search_artifact(&workspace)?;
            let history = pipeline::load_history_artifact(&workspace)?;
            let timings = read_timings(&workspace)?;
            let report = pipeline::stage_report(
                &config,
                &workspace,
                &dataset,
                &split,
                &matrix,
                &search_result,
                timings,
            )?;
            pipeline::stage_plots(
                &config,
                &workspace,
                &history,
                &search_result,
                &dataset,
                &split,
            )?;
            verify_chain(&workspace)?;
            print!("{}", report.text_table());
        }
        Command::Benchmark(args) => {
            let config = args.resolve()?;
            let outcome = pipeline::run_benchmark(&config)?;
            print!("{}", outcome.report.text_table());
            println!(
                "artifacts in {} (collect {} ms, train {} ms, search {} ms)",
                config.output_dir.display(),
                outcome.timings.collect_ms,
                outcome.timings.train_ms,
                outcome.timings.search_ms
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}
