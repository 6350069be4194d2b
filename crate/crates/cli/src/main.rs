use std::fs;
use std::io::{self, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;
use metricscope_cli::config::{load_suite, BatchConfig, DataSource, DESK_BATCH, TEST_PER_CLASS};
use metricscope_cli::runner::{self, diagnose, evaluate};
use metricscope_cli::{charts, run_experiment, run_suite, CliError, ExperimentConfig};
use metricscope_core::data::{generate_split, load_features, save_features};
use metricscope_core::model::load_checkpoint;
use metricscope_core::{FeatureDataset, LossKind, Preset};
use metricscope_core::{GreedinessSummary, RecallReport, VarianceReport};
use serde::Serialize;

#[derive(Serialize)]
struct Diagnosis {
    variance: VarianceReport,
    recall: RecallReport,
}

#[derive(Serialize)]
struct RunOutcome<'a> {
    #[serde(rename = "final")]
    final_report: &'a VarianceReport,
    greediness: Option<&'a GreedinessSummary>,
    recall: &'a RecallReport,
}

#[derive(Parser)]
#[command(
    name = "metricscope",
    version,
    about = "Train and diagnose metric-learning losses on fixed features"
)]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test pair in the feature-file format.
    Generate(GenerateArgs),
    /// Run one experiment.
    Train(TrainArgs),
    /// Run several losses and print a comparison table.
    Suite(SuiteArgs),
    /// Variance and recall diagnostics of an embedding file.
    Diagnose(DiagnoseArgs),
    /// Recall@k of an embedding file, or of features through a checkpoint.
    Evaluate(EvaluateArgs),
    /// Render SVG charts from a training log.
    Charts(ChartsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    center_scale: Option<f64>,
    #[arg(long)]
    within_std: Option<f64>,
    #[arg(long, default_value_t = TEST_PER_CLASS)]
    test_per_class: usize,
}

/// Flags shared by `train` and `suite`; each overrides the matching config
/// field.
#[derive(Args, Clone)]
struct RunArgs {
    /// Synthetic data preset used when no feature files are given.
    #[arg(long, default_value = "desk")]
    preset: Preset,
    /// Defaults to 0, or to the config file's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Training feature file (manifest or CSV); requires --test.
    #[arg(long, requires = "test")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    center_weight: Option<f64>,
    #[arg(long)]
    arcface_margin: Option<f64>,
    #[arg(long)]
    arcface_scale: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    output_dim: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    classes_per_batch: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    snapshot_interval: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// 100 epochs, batch 512, 512→128 head.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    loss: Option<LossKind>,
    #[command(flatten)]
    run: RunArgs,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct SuiteArgs {
    /// JSON array of experiment configs; replaces the flag-built runs.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    losses: Option<Vec<LossKind>>,
    /// Seeds to repeat every loss with; defaults to --seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    jobs: Option<NonZeroUsize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    embeddings: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    k: Vec<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    file: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    k: Vec<usize>,
    /// Embed `file` through this checkpoint first.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct ChartsArgs {
    log: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Plot sign(y)·log10(1 + |y|/1e-3) instead of y.
    #[arg(long)]
    symlog: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Train(args) => train(args),
        Command::Suite(args) => suite(args),
        Command::Diagnose(args) => {
            let ds = load(&args.embeddings)?;
            let (variance, recall) = diagnose(&ds, &args.k)?;
            print_json(&Diagnosis { variance, recall })
        }
        Command::Evaluate(args) => {
            let mut ds = load(&args.file)?;
            if let Some(dir) = &args.checkpoint {
                let (head, _) = load_checkpoint(dir).map_err(CliError::from)?;
                let embedded = head
                    .embed(&ds.to_labeled_set().map_err(CliError::from)?)
                    .map_err(CliError::from)?;
                ds = FeatureDataset::from_labeled_set(&embedded, ds.split).map_err(CliError::from)?;
            }
            print_json(&evaluate(&ds, &args.k)?)
        }
        Command::Charts(args) => {
            for path in charts::render_charts(&args.log, &args.out_dir, args.symlog)? {
                emit(&format!("{}\n", path.display()))?;
            }
            Ok(())
        }
    }
}

fn load(path: &Path) -> anyhow::Result<FeatureDataset> {
    load_features(path)
        .map_err(CliError::from)
        .with_context(|| format!("reading {}", path.display()))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let mut spec = args.preset.spec(args.seed);
    spec.class_count = args.classes.unwrap_or(spec.class_count);
    spec.samples_per_class = args.per_class.unwrap_or(spec.samples_per_class);
    spec.dim = args.dim.unwrap_or(spec.dim);
    spec.center_scale = args.center_scale.unwrap_or(spec.center_scale);
    spec.within_std = args.within_std.unwrap_or(spec.within_std);
    let (train, test) = generate_split(&spec, args.test_per_class).map_err(|e| CliError::Config(e.to_string()))?;
    for (ds, name) in [(&train, "train.json"), (&test, "test.json")] {
        let path = args.out_dir.join(name);
        save_features(ds, &path).map_err(CliError::from)?;
        emit(&format!("{}\n", path.display()))?;
    }
    let spec_path = args.out_dir.join("synthetic.json");
    fs::write(&spec_path, serde_json::to_string_pretty(&spec)? + "\n").map_err(|e| CliError::io(&spec_path, e))?;
    Ok(())
}

/// Config for `loss` from `base` (or the desk preset) with flag overrides.
fn resolve(
    base: Option<ExperimentConfig>,
    loss: Option<LossKind>,
    run: &RunArgs,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match base {
        Some(cfg) => cfg,
        None => {
            let loss = loss.ok_or_else(|| CliError::Config("no loss given".into()))?;
            ExperimentConfig::desk(loss, run.preset, run.seed.unwrap_or(0), &run.out_dir)
        }
    };
    cfg.seed = run.seed.unwrap_or(cfg.seed);
    if let Some(loss) = loss {
        if loss != cfg.loss {
            let classes = cfg.data.class_count()?;
            cfg.loss = loss;
            cfg.batch = BatchConfig::for_batch_size(loss, classes, cfg.batch.batch_size());
        }
    }
    cfg.out_dir = run.out_dir.clone();
    if let (Some(train), Some(test)) = (&run.train, &run.test) {
        cfg.data = DataSource::Files {
            train: train.clone(),
            test: test.clone(),
        };
        cfg.batch = BatchConfig::for_batch_size(cfg.loss, cfg.data.class_count()?, DESK_BATCH);
    }
    if run.full_scale {
        cfg = cfg.into_full_scale()?;
    }
    let o = run;
    cfg.epochs = o.epochs.unwrap_or(cfg.epochs);
    cfg.optimizer.lr = o.lr.unwrap_or(cfg.optimizer.lr);
    cfg.optimizer.weight_decay = o.weight_decay.unwrap_or(cfg.optimizer.weight_decay);
    let lc = &mut cfg.loss_config;
    lc.margin = o.margin.unwrap_or(lc.margin);
    lc.temperature = o.temperature.unwrap_or(lc.temperature);
    lc.center_weight = o.center_weight.unwrap_or(lc.center_weight);
    lc.arcface_margin = o.arcface_margin.unwrap_or(lc.arcface_margin);
    lc.arcface_scale = o.arcface_scale.unwrap_or(lc.arcface_scale);
    cfg.head.hidden = o.hidden.unwrap_or(cfg.head.hidden);
    cfg.head.output = o.output_dim.unwrap_or(cfg.head.output);
    cfg.head.dropout = o.dropout.unwrap_or(cfg.head.dropout);
    cfg.batch.classes_per_batch = o.classes_per_batch.unwrap_or(cfg.batch.classes_per_batch);
    cfg.batch.samples_per_class = o.samples_per_class.unwrap_or(cfg.batch.samples_per_class);
    cfg.snapshot_interval = o.snapshot_interval.unwrap_or(cfg.snapshot_interval);
    if let Some(k) = &o.k {
        cfg.recall_ks = k.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let base = args.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let cfg = resolve(base, args.loss, &args.run)?;
    if args.print_config {
        return print_json(&cfg);
    }
    let summary = run_experiment(&cfg)?;
    info!("wrote {}", cfg.out_dir.join(runner::SUMMARY_FILE).display());
    print_json(&RunOutcome {
        final_report: &summary.final_report,
        greediness: summary.greediness.as_ref(),
        recall: &summary.recall,
    })
}

fn suite(args: SuiteArgs) -> anyhow::Result<()> {
    let cfgs = match &args.config {
        Some(path) => load_suite(path)?,
        None => {
            let losses = args.losses.clone().unwrap_or_else(|| LossKind::ALL.to_vec());
            let seeds = args.seeds.clone().unwrap_or_else(|| vec![args.run.seed.unwrap_or(0)]);
            let mut cfgs = Vec::new();
            for &seed in &seeds {
                for &loss in &losses {
                    let mut run = args.run.clone();
                    run.seed = Some(seed);
                    run.out_dir = if seeds.len() > 1 {
                        args.run.out_dir.join(format!("{loss}-s{seed}"))
                    } else {
                        args.run.out_dir.join(loss.name())
                    };
                    cfgs.push(resolve(None, Some(loss), &run)?);
                }
            }
            cfgs
        }
    };
    if cfgs.is_empty() {
        return Err(CliError::Config("suite has no runs".into()).into());
    }
    for cfg in &cfgs {
        cfg.validate()?;
    }

    let report = run_suite(&cfgs, args.jobs);
    let table = report.table();
    emit(&table)?;
    let out = &args.run.out_dir;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    fs::write(out.join("suite.txt"), &table).map_err(|e| CliError::io(out.join("suite.txt"), e))?;
    fs::write(out.join("suite.json"), serde_json::to_string_pretty(&report)? + "\n")
        .map_err(|e| CliError::io(out.join("suite.json"), e))?;

    match report.failures() {
        0 => Ok(()),
        failed => Err(CliError::SuiteFailures {
            failed,
            total: report.rows.len(),
        }
        .into()),
    }
}
