//! pttdet: generate synthetic ECG/PPG corpora, estimate pulse transit
//! times, train the detector, and evaluate stored models.
//!
//! All tunables live in one versioned TOML config (see configs/ for a
//! documented example); command-line flags only choose file locations and
//! optionally override the seed.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ptt_core::classifier::TrainedForest;
use ptt_core::eval::{self, EvaluationReport, FoldMetrics};
use ptt_core::features::Sample;
use ptt_core::io;
use ptt_core::pipeline::{self, PipelineParams, Prepared};
use ptt_core::ptt::{naive_ptt, reactive_ptt};
use ptt_core::signal::{Case, SeizureType};
use ptt_core::synthgen::{self, EventSpec, GeneratorSpec};

const CONFIG_VERSION: u32 = 1;
/// Fixed epoch stamped into generated case metadata; generation must be
/// byte-identical across reruns, so no wall clock.
const DEMO_EPOCH: &str = "2024-01-01T00:00:00Z";
/// Decision threshold on the forest vote fraction.
const DECISION_THRESHOLD: f64 = 0.5;

/// The config file: `version` plus a `[generate]` corpus recipe and a
/// `[pipeline]` parameter block. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    version: u32,
    #[serde(default)]
    generate: GenerateConfig,
    #[serde(default)]
    pipeline: PipelineParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            generate: GenerateConfig::default(),
            pipeline: PipelineParams::default(),
        }
    }
}

/// Corpus recipe: case count, seizure share, and the per-case template
/// the generator jitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GenerateConfig {
    n_cases: usize,
    seizure_fraction: f64,
    seed: u64,
    template: GeneratorSpec,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            n_cases: 20,
            seizure_fraction: 0.5,
            seed: 424242,
            template: GeneratorSpec {
                duration_s: 3600.0,
                base_hr: 75.0,
                hrv_sigma_ms: 10.0,
                true_ptt_baseline_ms: 250.0,
                drift_rate_ms_per_s: 150.0 / 60.0,
                noise_sigma_ms: 2.0,
                events: vec![EventSpec {
                    start_s: 0.0,
                    end_s: 150.0,
                    ptt_delta_ms: -55.0,
                    hr_delta_bpm: 10.0,
                    seizure_type: SeizureType::Cps,
                }],
                dropout: 0.03,
                seed: 0,
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pttdet",
    version,
    about = "Seizure detection over pulse-transit-time estimates"
)]
struct Cli {
    /// TOML config file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed (corpus seed for `generate`, pipeline
    /// seed for `run`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and write its manifest.
    Generate {
        /// Output directory for case files and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over a corpus manifest.
    Run {
        /// Path to a manifest.json listing case metadata files.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for report, dataset, model, and traces.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write both PTT estimates (and the offset trace) for one case.
    Ptt {
        /// Path to a case metadata file.
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-evaluate a stored dataset with a stored model.
    Eval {
        /// Dataset CSV as written by `run`.
        #[arg(long)]
        dataset: PathBuf,
        /// Model JSON as written by `run`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        // `:#` renders the whole context chain on one line.
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { out } => cmd_generate(&config, cli.seed, &out),
        Command::Run { manifest, out } => cmd_run(&config, cli.seed, &manifest, &out),
        Command::Ptt { case, out } => cmd_ptt(&config, &case, &out),
        Command::Eval {
            dataset,
            model,
            out,
        } => cmd_eval(&config, &dataset, &model, &out),
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    let config = match path {
        None => Config::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
    };
    if config.version != CONFIG_VERSION {
        bail!(
            "unsupported config version {} (this build reads version {CONFIG_VERSION})",
            config.version
        );
    }
    config.pipeline.validate().context("invalid [pipeline] section")?;
    config
        .generate
        .template
        .validate()
        .context("invalid [generate.template] section")?;
    Ok(config)
}

fn cmd_generate(config: &Config, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let gen = &config.generate;
    let seed = seed.unwrap_or(gen.seed);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let corpus = synthgen::generate_corpus(gen.n_cases, gen.seizure_fraction, &gen.template, seed)?;
    let mut meta_files = Vec::with_capacity(corpus.len());
    for (case, truth) in &corpus {
        let meta_name = format!("{}.json", case.id());
        io::store_case(&out.join(&meta_name), case, DEMO_EPOCH)
            .with_context(|| format!("writing case {}", case.id()))?;
        io::write_groundtruth(&out.join(format!("{}_truth.json", case.id())), truth)?;
        log::info!(
            "generate {}: {} ecg / {} ppg entries, {} seizure(s)",
            case.id(),
            case.ecg().len(),
            case.ppg().len(),
            case.seizures().len()
        );
        meta_files.push(meta_name);
    }
    let manifest_path = out.join("manifest.json");
    io::write_manifest(&manifest_path, &io::Manifest { cases: meta_files })?;
    println!(
        "generated {} cases (seed {seed}) -> {}",
        corpus.len(),
        manifest_path.display()
    );
    Ok(())
}

fn load_corpus(manifest_path: &Path) -> anyhow::Result<Vec<Case>> {
    let manifest = io::read_manifest(manifest_path)
        .with_context(|| format!("reading manifest {}", manifest_path.display()))?;
    let mut cases = Vec::with_capacity(manifest.cases.len());
    let mut failures = Vec::new();
    for path in io::manifest_case_paths(manifest_path, &manifest) {
        match io::load_case(&path) {
            Ok(case) => {
                log::info!(
                    "load {}: {} ecg / {} ppg entries",
                    case.id(),
                    case.ecg().len(),
                    case.ppg().len()
                );
                cases.push(case);
            }
            Err(err) => failures.push(format!("{}: {err}", path.display())),
        }
    }
    if !failures.is_empty() {
        bail!(
            "failed to load {} case(s):\n  {}",
            failures.len(),
            failures.join("\n  ")
        );
    }
    Ok(cases)
}

fn cmd_run(
    config: &Config,
    seed: Option<u64>,
    manifest: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let mut params = config.pipeline.clone();
    if let Some(seed) = seed {
        params.seed = seed;
    }
    // Claim the output directory before the heavy work so an unwritable
    // destination fails fast.
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let trace_dir = out.join("cases");
    fs::create_dir_all(&trace_dir)?;

    let cases = load_corpus(manifest)?;
    let run = pipeline::run_pipeline(&cases, &params)?;
    for outcome in &run.outcomes {
        let name = io::ptt_csv_name(&outcome.case_id, outcome.series.kind());
        io::write_ptt_csv(&trace_dir.join(name), &outcome.series)?;
        if let Some(trace) = &outcome.offset_trace {
            let points: Vec<(f64, f64)> = trace
                .points()
                .iter()
                .map(|p| (p.t, p.cumulative_offset))
                .collect();
            io::write_offset_csv(
                &trace_dir.join(format!("{}_offset.csv", outcome.case_id)),
                &points,
            )?;
        }
    }

    let samples = run.samples();
    io::write_dataset(&out.join("dataset.csv"), &samples, &params.features)?;
    io::write_roc_csv(&out.join("roc.csv"), &run.report.roc)?;
    run.model.save(&out.join("model.json"))?;
    write_json(&out.join("exclusions.json"), &run.exclusions)?;
    if let Some(search) = &run.search {
        write_json(&out.join("search.json"), search)?;
    }
    io::write_report(&out.join("report.json"), &run.report)?;

    let report = &run.report;
    println!(
        "report written to {}: {} samples ({} cases, {} excluded), \
         mean F1 {:.3} +/- {:.3}, AUC {:.3}, {:.2} false alarms/day",
        out.join("report.json").display(),
        report.n_samples,
        report.n_cases - report.n_cases_excluded,
        report.n_cases_excluded,
        report.f1.mean,
        report.f1.std,
        report.auc,
        report.false_alarm_rate_per_day
    );
    Ok(())
}

fn cmd_ptt(config: &Config, case_path: &Path, out: &Path) -> anyhow::Result<()> {
    let case = io::load_case(case_path)
        .with_context(|| format!("loading case {}", case_path.display()))?;
    let prepared = match pipeline::prepare_case(&case, &config.pipeline.preprocess)? {
        Prepared::Excluded(e) => bail!("case {} excluded: {}", e.case_id, e.reason),
        Prepared::Ready(p) => p,
    };
    let (ecg, ppg) = (prepared.case.ecg(), prepared.case.ppg());
    let naive = naive_ptt(ecg, ppg)?;
    let (reactive, trace) = reactive_ptt(ecg, ppg, &config.pipeline.reactive)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let id = prepared.case.id();
    io::write_ptt_csv(&out.join(io::ptt_csv_name(id, naive.kind())), &naive)?;
    io::write_ptt_csv(&out.join(io::ptt_csv_name(id, reactive.kind())), &reactive)?;
    let points: Vec<(f64, f64)> = trace
        .points()
        .iter()
        .map(|p| (p.t, p.cumulative_offset))
        .collect();
    io::write_offset_csv(&out.join(format!("{id}_offset.csv")), &points)?;
    println!(
        "{id}: {} naive / {} reactive values, {} offset evaluations -> {}",
        naive.len(),
        reactive.len(),
        points.len(),
        out.display()
    );
    Ok(())
}

/// Scores a stored dataset with a stored model and writes a fresh report.
/// The whole dataset is treated as a single evaluation fold, so when the
/// model was trained on these same samples the figures are resubstitution
/// metrics, not held-out ones.
fn cmd_eval(config: &Config, dataset: &Path, model: &Path, out: &Path) -> anyhow::Result<()> {
    let samples = io::read_dataset(dataset)
        .with_context(|| format!("reading dataset {}", dataset.display()))?;
    let forest = TrainedForest::load(model)
        .with_context(|| format!("loading model {}", model.display()))?;

    let scores = samples
        .iter()
        .map(|s| forest.predict_proba(&s.features))
        .collect::<Result<Vec<f64>, _>>()?;
    let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    let predictions: Vec<bool> = scores.iter().map(|&s| s >= DECISION_THRESHOLD).collect();
    let confusion = eval::confusion_metrics(&labels, &predictions)?;
    let n_cases = distinct_cases(&samples);
    let report = EvaluationReport::from_folds(
        &samples,
        vec![FoldMetrics { fold: 0, confusion }],
        &scores,
        DECISION_THRESHOLD,
        config.pipeline.features.sample_len_s,
        config.pipeline.features.o_s_s,
        n_cases,
        0,
    )?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    io::write_roc_csv(&out.join("roc.csv"), &report.roc)?;
    io::write_report(&out.join("report.json"), &report)?;
    println!(
        "report written to {}: {} samples, sensitivity {:.3}, specificity {:.3}, AUC {:.3}",
        out.join("report.json").display(),
        report.n_samples,
        report.pooled.sensitivity,
        report.pooled.specificity,
        report.auc
    );
    Ok(())
}

fn distinct_cases(samples: &[Sample]) -> usize {
    samples
        .iter()
        .map(|s| s.case_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
