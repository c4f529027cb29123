//! End-to-end acceptance gate for the whole workspace.
//!
//! Each test prints one `ACCEPTANCE <n> <name>: PASS/FAIL` line before
//! asserting, so a plain `cargo test --test acceptance -- --nocapture`
//! doubles as a checklist. Heavy pipeline runs are shared between tests
//! through a process-wide cache keyed by configuration nickname; artifacts
//! land under the system temp directory and never touch the repository.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use fsns_bench::config::{PipelineConfig, Profile};
use fsns_bench::pipeline::{run_benchmark, PipelineOutcome};
use fsns_bench::report::ReportRow;
use fsns_collect::{
    build_corpus, decode_tokens, encode_sequence, Channel, CollectionLog, LogRecord, SubsetRecord,
    Vocabulary,
};
use fsns_core::{
    brute_force_best_subset, build_matrix, mutual_information, pearson_abs, subset_redundancy,
    FeatureSubset, RedundancyMetric, TabularDataset, Task,
};
use fsns_model::{
    gradient_ascend, train, weighted_total, EncodedRecord, HeadEval, KlForm, ModelConfig,
    ScoreHeads, SearchConfig, SubsetEmbeddingModel,
};
use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// ---------------------------------------------------------------------------
// Shared run cache and helpers
// ---------------------------------------------------------------------------

struct CachedRun {
    outcome: PipelineOutcome,
    wall_ms: u64,
}

static RUNS: OnceLock<Mutex<HashMap<String, Arc<CachedRun>>>> = OnceLock::new();

/// Run the full pipeline for `key` once per process and reuse the outcome.
fn cached_run(key: &str, build: impl FnOnce(PathBuf) -> PipelineConfig) -> Arc<CachedRun> {
    let map = RUNS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("run cache poisoned");
    if let Some(run) = guard.get(key) {
        return Arc::clone(run);
    }
    let dir = std::env::temp_dir()
        .join(format!("fsns-acceptance-{}", std::process::id()))
        .join(key);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear stale run directory");
    }
    let config = build(dir);
    let started = Instant::now();
    let outcome = run_benchmark(&config).unwrap_or_else(|e| panic!("pipeline run {key}: {e}"));
    let run = Arc::new(CachedRun {
        outcome,
        wall_ms: started.elapsed().as_millis() as u64,
    });
    guard.insert(key.to_string(), Arc::clone(&run));
    run
}

/// Small-but-real pipeline settings shared by the fast end-to-end checks.
const LIGHT_BODY: &str = r#"
[collect]
episodes = 40
steps_per_episode = 6
copies = 5

[collect.collector]
replay_capacity = 1500
batch_size = 16
hidden_width = 32

[model]
token_embedding_dim = 16
encoder_layers = 1
decoder_layers = 1
attention_heads = 4
feedforward_dim = 64
latent_dim = 8
evaluator_hidden = 32
batch_size = 32
learning_rate = 0.002
pretrain_epochs = 60
finetune_epochs = 25

[search]
n_starts = 12
steps = 15
step_size = 0.05
max_decode_length = 12
"#;

const SEPARABLE: &str = "[dataset.synthetic]\nkind = \"separable\"\ninformative = 2\nnoise = 6\nsamples = 200\nseed = 1400\n";
const REDUNDANT: &str = "[dataset.synthetic]\nkind = \"redundant\"\ninformative = 2\nduplicates = 3\ncorrelation = 1.0\nnoise = 2\nsamples = 240\nseed = 77\n";
const NOISE_8: &str = "[dataset.synthetic]\nkind = \"noise\"\ninformative = 3\nnoise = 5\nsamples = 200\nseed = 404\n";
const NOISE_50: &str = "[dataset.synthetic]\nkind = \"noise\"\ninformative = 5\nnoise = 45\nsamples = 500\nseed = 2026\n";

fn light_config(dataset_toml: &str, out: PathBuf, master_seed: u64) -> PipelineConfig {
    let text = format!("{dataset_toml}{LIGHT_BODY}");
    let mut config: PipelineConfig = toml::from_str(&text).expect("light config parses");
    config.output_dir = out;
    config.apply_master_seed(master_seed);
    config
}

/// Tiny smoke-scale configuration for the determinism check.
fn tiny_config(out: PathBuf) -> PipelineConfig {
    let text = r#"
[dataset.synthetic]
kind = "separable"
informative = 2
noise = 2
samples = 40
seed = 5

[collect]
episodes = 4
steps_per_episode = 3
copies = 2

[collect.collector]
replay_capacity = 200
batch_size = 8
hidden_width = 16

[model]
token_embedding_dim = 16
encoder_layers = 1
decoder_layers = 1
attention_heads = 4
feedforward_dim = 32
latent_dim = 8
evaluator_hidden = 16
batch_size = 16
learning_rate = 0.001
pretrain_epochs = 3
finetune_epochs = 2

[search]
n_starts = 3
steps = 2
max_decode_length = 6
"#;
    let mut config: PipelineConfig = toml::from_str(text).expect("tiny config parses");
    config.output_dir = out;
    config
}

fn print_criterion(number: u32, name: &str, pass: bool) {
    println!(
        "ACCEPTANCE {number:2} {name}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn row<'a>(run: &'a CachedRun, method: &str) -> &'a ReportRow {
    run.outcome
        .report
        .rows
        .iter()
        .find(|r| r.method == method)
        .unwrap_or_else(|| panic!("report lacks a `{method}` row"))
}

/// Baseline rows: everything except the full set and the pipeline's own row.
fn baseline_rows(run: &CachedRun) -> Vec<&ReportRow> {
    run.outcome
        .report
        .rows
        .iter()
        .filter(|r| r.method != "original" && r.method != "fsns")
        .collect()
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            x * scale
        })
        .collect()
}

/// `|a - b|` within `tol` relative to the larger magnitude, with an absolute
/// floor so near-zero pairs compare sanely.
fn close_rel(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) + floor
}

// ---------------------------------------------------------------------------
// 1. Noise resistance
// ---------------------------------------------------------------------------

#[test]
fn c01_noise_resistance() {
    let mut seed_passes = 0;
    let mut detail = Vec::new();
    for master in [11u64, 22, 33] {
        let run = cached_run(&format!("desk-noise50-m{master}"), |dir| {
            let mut config: PipelineConfig = toml::from_str(NOISE_50).expect("dataset parses");
            config.apply_profile(Profile::Desk);
            config.output_dir = dir;
            config.apply_master_seed(master);
            config
        });
        assert!(
            run.wall_ms <= 900_000,
            "desk run for master seed {master} took {} ms (budget 900000)",
            run.wall_ms
        );

        let informative: BTreeSet<usize> = run
            .outcome
            .meta
            .informative
            .clone()
            .expect("synthetic dataset records its informative columns")
            .into_iter()
            .collect();
        let picked = &row(&run, "fsns").subset;
        let hits = picked.iter().filter(|f| informative.contains(f)).count();
        let noise_picked = picked.len() - hits;

        let n = run.outcome.meta.n_features;
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + master);
        let draws = 20;
        let mut total_noise = 0usize;
        for _ in 0..draws {
            let draw = sample(&mut rng, n, picked.len());
            total_noise += draw.iter().filter(|f| !informative.contains(f)).count();
        }
        let random_mean = total_noise as f64 / draws as f64;

        let pass = hits >= 3 && (noise_picked as f64) < random_mean;
        detail.push(format!(
            "seed {master}: {hits}/5 informative, {noise_picked} noise vs {random_mean:.2} random ({})",
            if pass { "ok" } else { "miss" }
        ));
        if pass {
            seed_passes += 1;
        }
    }
    let pass = seed_passes >= 2;
    print_criterion(1, "noise-resistance", pass);
    assert!(pass, "noise recovery below bar: {}", detail.join("; "));
}

// ---------------------------------------------------------------------------
// 2. Downstream improvement
// ---------------------------------------------------------------------------

#[test]
fn c02_downstream_improvement() {
    let mut all_pass = true;
    let mut detail = Vec::new();
    for (key, dataset) in [("sep", SEPARABLE), ("red", REDUNDANT)] {
        let mut seed_passes = 0;
        for master in [1u64, 2, 3] {
            let run = cached_run(&format!("light-{key}-m{master}"), |dir| {
                light_config(dataset, dir, master)
            });
            let full = row(&run, "original").score_b;
            let ours = row(&run, "fsns").score_b;
            let worst = baseline_rows(&run)
                .iter()
                .map(|r| r.score_b)
                .fold(f64::INFINITY, f64::min);
            let pass = ours >= full - 0.005 && ours >= worst;
            detail.push(format!(
                "{key} seed {master}: ours {ours:.4}, full {full:.4}, worst baseline {worst:.4} ({})",
                if pass { "ok" } else { "miss" }
            ));
            if pass {
                seed_passes += 1;
            }
        }
        if seed_passes < 2 {
            all_pass = false;
        }
    }
    print_criterion(2, "downstream-improvement", all_pass);
    assert!(all_pass, "scores below bar: {}", detail.join("; "));
}

// ---------------------------------------------------------------------------
// 3. Redundancy minimization
// ---------------------------------------------------------------------------

#[test]
fn c03_redundancy_minimization() {
    let mut seed_passes = 0;
    let mut detail = Vec::new();
    for master in [1u64, 2, 3] {
        let aware = cached_run(&format!("light-red-m{master}"), |dir| {
            light_config(REDUNDANT, dir, master)
        });
        let blind = cached_run(&format!("light-red-blind-m{master}"), |dir| {
            let mut config = light_config(REDUNDANT, dir, master);
            config.redundancy = false;
            config
        });
        let red_aware = row(&aware, "fsns").redundancy_x100;
        let red_blind = row(&blind, "fsns").redundancy_x100;
        let score_aware = row(&aware, "fsns").score_b;
        let score_blind = row(&blind, "fsns").score_b;
        let pass = red_aware <= 0.8 * red_blind && score_aware >= score_blind - 0.02;
        detail.push(format!(
            "seed {master}: redundancy {red_aware:.2} vs {red_blind:.2}, score {score_aware:.4} vs {score_blind:.4} ({})",
            if pass { "ok" } else { "miss" }
        ));
        if pass {
            seed_passes += 1;
        }
    }
    let pass = seed_passes >= 2;
    print_criterion(3, "redundancy-minimization", pass);
    assert!(pass, "redundancy reduction below bar: {}", detail.join("; "));
}

// ---------------------------------------------------------------------------
// 4. Brute-force oracle proximity
// ---------------------------------------------------------------------------

#[test]
fn c04_brute_force_proximity() {
    let mut seed_passes = 0;
    let mut detail = Vec::new();
    for master in [1u64, 2, 3] {
        let run = cached_run(&format!("light-noise8-m{master}"), |dir| {
            light_config(NOISE_8, dir, master)
        });
        let started = Instant::now();
        let ranking = brute_force_best_subset(
            &run.outcome.dataset,
            &run.outcome.split,
            run.outcome.split.seed,
        )
        .expect("enumeration succeeds");
        let elapsed = started.elapsed();
        assert!(
            elapsed.as_secs() <= 300,
            "enumeration took {elapsed:?} (budget 300 s)"
        );
        assert_eq!(ranking.len(), 255, "8 features enumerate to 255 subsets");

        // Top 20% of 255 subsets: ranks 1..=51 of the descending scores.
        let cutoff_rank = (0.2 * ranking.len() as f64).ceil() as usize;
        let threshold = ranking[cutoff_rank - 1].1;
        let ours = row(&run, "fsns").score_b;
        let pass = ours >= threshold;
        detail.push(format!(
            "seed {master}: ours {ours:.4}, top-20% threshold {threshold:.4} ({})",
            if pass { "ok" } else { "miss" }
        ));
        if pass {
            seed_passes += 1;
        }
    }
    let pass = seed_passes >= 2;
    print_criterion(4, "brute-force-proximity", pass);
    assert!(pass, "selection outside top quintile: {}", detail.join("; "));
}

// ---------------------------------------------------------------------------
// 5. Unsupervised parity
// ---------------------------------------------------------------------------

#[test]
fn c05_unsupervised_parity() {
    let masters = [1u64, 2, 3];
    let mut sup_scores = Vec::new();
    let mut unsup_scores = Vec::new();
    let mut sup_collect_ms = 0u64;
    let mut unsup_collect_ms = 0u64;
    for master in masters {
        let sup = cached_run(&format!("light-sep-m{master}"), |dir| {
            light_config(SEPARABLE, dir, master)
        });
        let unsup = cached_run(&format!("light-sep-unsup-m{master}"), |dir| {
            let mut config = light_config(SEPARABLE, dir, master);
            config.collect.channel = Channel::Unsupervised;
            config
        });
        sup_scores.push(row(&sup, "fsns").score_b);
        unsup_scores.push(row(&unsup, "fsns").score_b);
        sup_collect_ms += sup.outcome.timings.collect_ms;
        unsup_collect_ms += unsup.outcome.timings.collect_ms;
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let sup_mean = mean(&sup_scores);
    let unsup_mean = mean(&unsup_scores);
    let parity = (sup_mean - unsup_mean).abs() <= 0.05;
    let faster = unsup_collect_ms < sup_collect_ms;
    let pass = parity && faster;
    print_criterion(5, "unsupervised-parity", pass);
    assert!(
        pass,
        "supervised mean {sup_mean:.4} vs unsupervised {unsup_mean:.4}; \
         collection {unsup_collect_ms} ms vs {sup_collect_ms} ms"
    );
}

// ---------------------------------------------------------------------------
// 6. Gradient correctness
// ---------------------------------------------------------------------------

fn probe_model_config() -> ModelConfig {
    ModelConfig {
        token_embedding_dim: 16,
        encoder_layers: 1,
        decoder_layers: 1,
        attention_heads: 4,
        feedforward_dim: 32,
        latent_dim: 8,
        evaluator_hidden: 16,
        seed: 99,
        ..ModelConfig::default()
    }
}

fn probe_record(latent_dim: usize) -> EncodedRecord {
    let record = SubsetRecord {
        tokens: vec![3, 6, 10],
        v: 0.62,
        u: 0.31,
    };
    let vocab = Vocabulary { n_features: 10 };
    let mut encoded = EncodedRecord::from_record(&record, &vocab, 12).expect("record encodes");
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    encoded.noise = Some(normal_vec(&mut rng, latent_dim, 1.0));
    encoded
}

#[test]
fn c06_gradient_correctness() {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-3;
    const FLOOR: f64 = 1e-7;
    let mut failures: Vec<String> = Vec::new();

    // Score heads: analytic latent gradients against central differences.
    let base = probe_model_config();
    let model = SubsetEmbeddingModel::new(base.clone(), 10, 12).expect("probe model builds");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = normal_vec(&mut rng, base.latent_dim, 0.5);
    let (_, _, dv, du) = model.scores_with_gradients(&z).expect("heads evaluate");
    for i in 0..z.len() {
        let mut plus = z.clone();
        plus[i] += H;
        let mut minus = z.clone();
        minus[i] -= H;
        let (vp, up) = model.predict_scores(&plus).expect("plus side");
        let (vm, um) = model.predict_scores(&minus).expect("minus side");
        let ndv = (vp - vm) / (2.0 * H);
        let ndu = (up - um) / (2.0 * H);
        if !close_rel(dv[i], ndv, TOL, FLOOR) {
            failures.push(format!("performance head dim {i}: {} vs {ndv}", dv[i]));
        }
        if !close_rel(du[i], ndu, TOL, FLOOR) {
            failures.push(format!("redundancy head dim {i}: {} vs {ndu}", du[i]));
        }
    }

    // Loss terms: isolate each component with its weight and compare
    // collected parameter gradients against central differences on the
    // weighted total, sampling a few entries per tensor.
    let record = probe_record(base.latent_dim);
    let terms: [(&str, f64, f64, f64, f64); 4] = [
        ("performance", 1.0, 0.0, 0.0, 0.0),
        ("reconstruction", 0.0, 1.0, 0.0, 0.0),
        ("kl", 0.0, 0.0, 1.0, 0.0),
        ("redundancy", 0.0, 0.0, 0.0, 1.0),
    ];
    for (term, alpha, beta, gamma, delta) in terms {
        let mut config = probe_model_config();
        config.performance_weight = alpha;
        config.reconstruction_weight = beta;
        config.redundancy_weight = delta;
        let mut model = SubsetEmbeddingModel::new(config, 10, 12).expect("term model builds");
        let (_, grads) = model
            .record_loss(&record, gamma, true)
            .expect("loss with gradients");
        let grads: BTreeMap<String, Vec<f64>> = grads.expect("gradients requested");

        let shapes: Vec<(String, usize)> = model
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.tensor.len()))
            .collect();
        let mut picker = ChaCha8Rng::seed_from_u64(31);
        for (tensor_index, (name, len)) in shapes.iter().enumerate() {
            for _ in 0..2 {
                let entry = picker.gen_range(0..*len);
                let analytic = grads
                    .get(name)
                    .map(|g| g[entry])
                    .unwrap_or_else(|| panic!("no gradient recorded for {name}"));
                let evaluate = |m: &SubsetEmbeddingModel| {
                    m.record_loss(&record, gamma, false)
                        .expect("loss re-evaluates")
                        .0
                        .total
                };
                let original = model.params()[tensor_index].tensor.as_slice()[entry];
                model.params_mut()[tensor_index].tensor.make_mut()[entry] = original + H;
                let plus = evaluate(&model);
                model.params_mut()[tensor_index].tensor.make_mut()[entry] = original - H;
                let minus = evaluate(&model);
                model.params_mut()[tensor_index].tensor.make_mut()[entry] = original;
                let numeric = (plus - minus) / (2.0 * H);
                if !close_rel(analytic, numeric, TOL, FLOOR) {
                    failures.push(format!(
                        "{term} loss, {name}[{entry}]: analytic {analytic} vs numeric {numeric}"
                    ));
                }
            }
        }
    }

    let pass = failures.is_empty();
    print_criterion(6, "gradient-correctness", pass);
    assert!(pass, "gradient mismatches: {}", failures.join("; "));
}

// ---------------------------------------------------------------------------
// 7. Loss closed forms
// ---------------------------------------------------------------------------

#[test]
fn c07_loss_closed_forms() {
    let mut failures: Vec<String> = Vec::new();
    let record = probe_record(8);
    let ids: Vec<u32> = record.encoder_tokens.iter().map(|&t| t as u32).collect();
    let mask = vec![true; ids.len()];
    let noise = record.noise.clone().expect("probe record fixes its noise");

    for (form, label) in [
        (KlForm::AsWritten, "as-written"),
        (KlForm::StandardGaussian, "standard-gaussian"),
    ] {
        let mut config = probe_model_config();
        config.kl_form = form;
        let model = SubsetEmbeddingModel::new(config, 10, 12).expect("model builds");
        let (breakdown, _) = model.record_loss(&record, 0.37, false).expect("loss runs");
        let enc = model
            .encode(&ids, &mask, Some(&noise))
            .expect("encoder runs");
        let d = enc.mean.len() as f64;
        let direct: f64 = match form {
            KlForm::AsWritten => {
                enc.mean
                    .iter()
                    .zip(&enc.log_scale)
                    .map(|(m, s)| s.exp() - s + m * m)
                    .sum::<f64>()
                    - d
            }
            KlForm::StandardGaussian => {
                0.5 * (enc
                    .mean
                    .iter()
                    .zip(&enc.log_scale)
                    .map(|(m, s)| (2.0 * s).exp() - 2.0 * s + m * m)
                    .sum::<f64>()
                    - d)
            }
        };
        if (direct - breakdown.kl).abs() > 1e-6 {
            failures.push(format!(
                "{label} divergence: direct {direct} vs reported {}",
                breakdown.kl
            ));
        }
    }

    // The weighted total is plain left-to-right arithmetic over the four
    // component values; frozen inputs must match exactly, not approximately.
    let config = probe_model_config();
    let (p, r, k, d) = (0.125, 0.75, 0.5, 0.25);
    let by_hand = config.performance_weight * p
        + config.reconstruction_weight * r
        + config.kl_weight * k
        + config.redundancy_weight * d;
    let reported = weighted_total(&config, p, r, k, d);
    if reported != by_hand {
        failures.push(format!("weighted total {reported} != hand value {by_hand}"));
    }

    let pass = failures.is_empty();
    print_criterion(7, "loss-closed-forms", pass);
    assert!(pass, "closed-form mismatches: {}", failures.join("; "));
}

// ---------------------------------------------------------------------------
// 8. Reconstruction fidelity
// ---------------------------------------------------------------------------

#[test]
fn c08_reconstruction_fidelity() {
    let n_features = 12usize;
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut records = Vec::new();
    while records.len() < 50 {
        let size = rng.gen_range(2..=6);
        let mut features: Vec<usize> = sample(&mut rng, n_features, size).into_vec();
        features.sort_unstable();
        if !seen.insert(features.clone()) {
            continue;
        }
        records.push(LogRecord {
            features,
            v: rng.gen_range(0.0..1.0),
            u: rng.gen_range(0.0..1.0),
            channel: Channel::Supervised,
        });
    }
    let log = CollectionLog {
        n_features,
        episodes: records.len(),
        channel: Channel::Supervised,
        redundancy_metric: RedundancyMetric::MutualInformation,
        records,
    };
    let corpus = build_corpus(&log, 3, 7).expect("corpus builds");
    assert_eq!(corpus.records.len(), 200, "50 records x (3 copies + 1)");

    let config = ModelConfig {
        token_embedding_dim: 32,
        encoder_layers: 1,
        decoder_layers: 1,
        attention_heads: 4,
        feedforward_dim: 128,
        latent_dim: 16,
        evaluator_hidden: 32,
        batch_size: 32,
        learning_rate: 3e-3,
        pretrain_epochs: 150,
        finetune_epochs: 0,
        seed: 5,
        ..ModelConfig::default()
    };

    let started = Instant::now();
    let mut model = SubsetEmbeddingModel::new(config, n_features, corpus.max_sequence_length)
        .expect("model builds");
    train(&mut model, &corpus, None).expect("pretraining runs");

    let mut correct = 0usize;
    let mut total = 0usize;
    for record in &corpus.records {
        let mask = vec![true; record.tokens.len()];
        let latent = model
            .encode(&record.tokens, &mask, None)
            .expect("record encodes")
            .mean;
        let mut prefix: Vec<u32> = vec![fsns_collect::SOS];
        let mut targets: Vec<u32> = record.tokens.clone();
        targets.push(fsns_collect::EOS);
        for &target in &targets {
            let probs = model.decode_step(&latent, &prefix).expect("step decodes");
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i as u32)
                .expect("non-empty distribution");
            if argmax == target {
                correct += 1;
            }
            total += 1;
            prefix.push(target);
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() <= 300,
        "pretraining probe took {elapsed:?} (budget 300 s)"
    );
    let accuracy = correct as f64 / total as f64;
    let pass = accuracy >= 0.95;
    print_criterion(8, "reconstruction-fidelity", pass);
    assert!(
        pass,
        "teacher-forced next-token accuracy {accuracy:.4} below 0.95 ({correct}/{total})"
    );
}

// ---------------------------------------------------------------------------
// 9. Augmentation invariants
// ---------------------------------------------------------------------------

#[test]
fn c09_augmentation_invariants() {
    let n_features = 20usize;
    let copies = 3usize;
    let vocab = Vocabulary { n_features };
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut records = Vec::new();
    while records.len() < 500 {
        let size = rng.gen_range(1..=8);
        let mut features: Vec<usize> = sample(&mut rng, n_features, size).into_vec();
        features.sort_unstable();
        if !seen.insert(features.clone()) {
            continue; // the corpus keys by subset, so keep the base set unique
        }
        records.push(LogRecord {
            features,
            v: rng.gen_range(-1.0..1.0),
            u: rng.gen_range(0.0..1.0),
            channel: Channel::Supervised,
        });
    }
    let by_subset: BTreeMap<Vec<usize>, (f64, f64)> = records
        .iter()
        .map(|r| (r.features.clone(), (r.v, r.u)))
        .collect();
    let log = CollectionLog {
        n_features,
        episodes: records.len(),
        channel: Channel::Supervised,
        redundancy_metric: RedundancyMetric::MutualInformation,
        records,
    };
    let corpus = build_corpus(&log, copies, 99).expect("corpus builds");

    let mut failures = 0usize;
    if corpus.records.len() != (copies + 1) * by_subset.len() {
        failures += 1;
    }
    for (g, (features, &(v, u))) in by_subset.iter().enumerate() {
        let base: Vec<u32> = features
            .iter()
            .map(|&f| vocab.feature_to_token(f).expect("feature in vocabulary"))
            .collect();
        let group = &corpus.records[g * (copies + 1)..(g + 1) * (copies + 1)];
        if group[0].tokens != base {
            failures += 1; // each group leads with the canonical sorted order
        }
        for member in group {
            let mut sorted = member.tokens.clone();
            sorted.sort_unstable();
            if sorted != base {
                failures += 1;
            }
            if member.v.to_bits() != v.to_bits() || member.u.to_bits() != u.to_bits() {
                failures += 1;
            }
            let (input, target, mask) =
                encode_sequence(member, &corpus.vocabulary, corpus.max_sequence_length)
                    .expect("sequence encodes");
            if decode_tokens(&input) != member.tokens || decode_tokens(&target) != member.tokens {
                failures += 1;
            }
            let real = mask.iter().filter(|&&m| m).count();
            if real != member.tokens.len() + 1 {
                failures += 1; // mask covers the tokens plus the end marker
            }
        }
    }

    let pass = failures == 0;
    print_criterion(9, "augmentation-invariants", pass);
    assert!(pass, "{failures} augmentation invariant violations");
}

// ---------------------------------------------------------------------------
// 10. Metric and matrix properties
// ---------------------------------------------------------------------------

#[test]
fn c10_metric_matrix_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut failures = 0usize;
    for case in 0..100 {
        let p = rng.gen_range(3..=8);
        let n = rng.gen_range(30..=60);
        let mut x = Array2::<f64>::zeros((n, p));
        for j in 0..p {
            let quantize = rng.gen_bool(0.3);
            for i in 0..n {
                let val: f64 = StandardNormal.sample(&mut rng);
                x[[i, j]] = if quantize { (val * 2.0).round() } else { val };
            }
        }
        let labels = vec![0.0; n];
        let dataset = TabularDataset::from_parts(
            format!("props-{case}"),
            x.clone(),
            labels,
            Task::Regression,
            None,
        )
        .expect("dataset builds");

        let mi = build_matrix(&dataset, RedundancyMetric::MutualInformation, None)
            .expect("matrix builds");
        let pe =
            build_matrix(&dataset, RedundancyMetric::PearsonAbs, None).expect("matrix builds");
        for i in 0..p {
            if (pe.get(i, i) - 1.0).abs() > 1e-9 {
                failures += 1;
            }
            for j in 0..p {
                if mi.get(i, j) != mi.get(j, i) || mi.get(i, j) < 0.0 {
                    failures += 1;
                }
                if pe.get(i, j) != pe.get(j, i) || pe.get(i, j) < 0.0 {
                    failures += 1;
                }
            }
        }

        // Pairwise function properties on two random distinct columns.
        let i = rng.gen_range(0..p);
        let mut j = rng.gen_range(0..p);
        if j == i {
            j = (j + 1) % p;
        }
        let xi: Vec<f64> = (0..n).map(|r| x[[r, i]]).collect();
        let xj: Vec<f64> = (0..n).map(|r| x[[r, j]]).collect();
        let bins = 6;
        let forward = mutual_information(&xi, &xj, bins).expect("estimate runs");
        let backward = mutual_information(&xj, &xi, bins).expect("estimate runs");
        if forward != backward {
            failures += 1;
        }
        let scaled: Vec<f64> = xi.iter().map(|v| 2.5 * v + 7.0).collect();
        let plain = pearson_abs(&xi, &xj).expect("correlation runs");
        let affine = pearson_abs(&scaled, &xj).expect("correlation runs");
        if (plain - affine).abs() > 1e-9 {
            failures += 1;
        }

        // Nested subsets can only accumulate redundancy mass.
        let small_size = rng.gen_range(1..p);
        let small: Vec<usize> = sample(&mut rng, p, small_size).into_vec();
        let mut large = small.clone();
        for f in 0..p {
            if !large.contains(&f) && rng.gen_bool(0.5) {
                large.push(f);
            }
        }
        let small = FeatureSubset::new(small).expect("subset builds");
        let large = FeatureSubset::new(large).expect("subset builds");
        let lo = subset_redundancy(&mi, &small).expect("redundancy sums");
        let hi = subset_redundancy(&mi, &large).expect("redundancy sums");
        if lo > hi {
            failures += 1;
        }
    }

    let pass = failures == 0;
    print_criterion(10, "metric-matrix-properties", pass);
    assert!(pass, "{failures} matrix property violations");
}

// ---------------------------------------------------------------------------
// 11. Search invariants
// ---------------------------------------------------------------------------

struct FlatHeads {
    dim: usize,
}

impl ScoreHeads for FlatHeads {
    fn latent_dim(&self) -> usize {
        self.dim
    }
    fn value_and_grads(&self, _latent: &[f64]) -> fsns_model::Result<HeadEval> {
        Ok(HeadEval {
            v: 0.25,
            u: 0.5,
            dv: vec![0.0; self.dim],
            du: vec![0.0; self.dim],
        })
    }
}

struct QuadraticHeads {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ScoreHeads for QuadraticHeads {
    fn latent_dim(&self) -> usize {
        self.a.len()
    }
    fn value_and_grads(&self, latent: &[f64]) -> fsns_model::Result<HeadEval> {
        let v = -latent
            .iter()
            .zip(&self.a)
            .map(|(z, a)| (z - a) * (z - a))
            .sum::<f64>();
        let u = latent
            .iter()
            .zip(&self.b)
            .map(|(z, b)| (z - b) * (z - b))
            .sum::<f64>();
        let dv = latent
            .iter()
            .zip(&self.a)
            .map(|(z, a)| -2.0 * (z - a))
            .collect();
        let du = latent.iter().zip(&self.b).map(|(z, b)| 2.0 * (z - b)).collect();
        Ok(HeadEval { v, u, dv, du })
    }
}

#[test]
fn c11_search_invariants() {
    let mut failures: Vec<String> = Vec::new();
    let dim = 8usize;
    let mut rng = ChaCha8Rng::seed_from_u64(21);

    // Zero gradients leave the iterate exactly where it started.
    let config = SearchConfig {
        steps: 17,
        step_size: 0.1,
        lambda: 0.1,
        ..SearchConfig::default()
    };
    let z0 = normal_vec(&mut rng, dim, 1.0);
    let flat = gradient_ascend(&FlatHeads { dim }, &z0, &config).expect("ascent runs");
    if flat.len() != config.steps + 1 {
        failures.push(format!("flat trajectory length {}", flat.len()));
    }
    for point in &flat {
        let moved = point
            .iter()
            .zip(&z0)
            .any(|(p, z)| p.to_bits() != z.to_bits());
        if moved {
            failures.push("flat heads moved the iterate".to_string());
            break;
        }
    }

    // Planted quadratic heads have the closed-form optimum
    // (a + lambda * b) / (1 + lambda) for the ascent direction dv - lambda*du.
    let a = normal_vec(&mut rng, dim, 1.0);
    let b = normal_vec(&mut rng, dim, 1.0);
    let quad_config = SearchConfig {
        steps: 60,
        step_size: 0.1,
        lambda: 0.1,
        ..SearchConfig::default()
    };
    let heads = QuadraticHeads {
        a: a.clone(),
        b: b.clone(),
    };
    let start = normal_vec(&mut rng, dim, 1.0);
    let trajectory = gradient_ascend(&heads, &start, &quad_config).expect("ascent runs");
    if trajectory.len() != quad_config.steps + 1 {
        failures.push(format!("quadratic trajectory length {}", trajectory.len()));
    }
    let last = trajectory.last().expect("trajectory non-empty");
    for i in 0..dim {
        let optimum = (a[i] + quad_config.lambda * b[i]) / (1.0 + quad_config.lambda);
        if (last[i] - optimum).abs() > 1e-3 {
            failures.push(format!(
                "dim {i}: converged to {} but optimum is {optimum}",
                last[i]
            ));
        }
    }

    // The full pipeline's recorded trajectories keep the same bookkeeping:
    // one scored point per step plus the start.
    let run = cached_run("light-sep-m1", |dir| light_config(SEPARABLE, dir, 1));
    let expected = run.outcome.config.search.steps + 1;
    for (s, points) in run.outcome.search.trajectories.iter().enumerate() {
        if points.len() != expected {
            failures.push(format!("pipeline trajectory {s} has {} points", points.len()));
        }
        for (step, point) in points.iter().enumerate() {
            if point.step != step {
                failures.push(format!("pipeline trajectory {s} misnumbers step {step}"));
                break;
            }
        }
    }

    let pass = failures.is_empty();
    print_criterion(11, "search-invariants", pass);
    assert!(pass, "search invariant violations: {}", failures.join("; "));
}

// ---------------------------------------------------------------------------
// 12. Determinism
// ---------------------------------------------------------------------------

#[test]
fn c12_benchmark_determinism() {
    let base = std::env::temp_dir().join(format!("fsns-acceptance-{}", std::process::id()));
    let dir_a = base.join("det-a");
    let dir_b = base.join("det-b");
    for dir in [&dir_a, &dir_b] {
        if dir.exists() {
            std::fs::remove_dir_all(dir).expect("clear stale determinism directory");
        }
    }

    let config_a = tiny_config(dir_a.clone());
    let first = run_benchmark(&config_a).expect("first run succeeds");
    let second = run_benchmark(&config_a).expect("repeat run succeeds");
    let config_b = tiny_config(dir_b);
    let elsewhere = run_benchmark(&config_b).expect("relocated run succeeds");

    let view_first = first.report.determinism_view().expect("view serializes");
    let view_second = second.report.determinism_view().expect("view serializes");
    let view_elsewhere = elsewhere
        .report
        .determinism_view()
        .expect("view serializes");

    let pass = view_first == view_second && view_first == view_elsewhere;
    print_criterion(12, "benchmark-determinism", pass);
    assert!(
        pass,
        "reports differ beyond timing/location fields:\nfirst:  {view_first}\nsecond: {view_second}\nmoved:  {view_elsewhere}"
    );
}
