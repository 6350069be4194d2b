//! Single experiment: data → head → loss → diagnostics → retrieval.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use metricscope_core::data::{generate_split, load_features, save_features};
use metricscope_core::diagnostics::{cosine_distance_stats, summarize_greediness, Snapshot};
use metricscope_core::model::save_checkpoint;
use metricscope_core::retrieval::recall_at_k;
use metricscope_core::{
    FeatureDataset, GreedinessSummary, LabeledSet, RecallReport, Split, TrainLog, TrainSettings, Trainer,
    VarianceReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{CliError, Result};

pub const LOG_FILE: &str = "train_log.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSummary {
    pub status: String,
    pub library_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub epochs_completed: usize,
    pub initial: VarianceReport,
    /// Diagnostics of the embedding dump, so `diagnose` on the dump
    /// reproduces them.
    #[serde(rename = "final")]
    pub final_report: VarianceReport,
    pub snapshots: Vec<Snapshot>,
    /// Absent when no epoch ran.
    pub greediness: Option<GreedinessSummary>,
    pub recall: RecallReport,
    /// Written to `timing.json` instead of the summary.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// Written in place of the summary when a run aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureMarker {
    pub status: String,
    pub library_version: String,
    pub config_hash: String,
    pub epochs_completed: usize,
    pub error: String,
}

#[derive(Debug, Serialize)]
struct Timing {
    wall_clock_seconds: f64,
}

/// Train and test splits of a data source.
pub fn load_data(source: &DataSource) -> Result<(LabeledSet, LabeledSet)> {
    let (train, test) = match source {
        DataSource::Synthetic { spec, test_per_class } => generate_split(spec, *test_per_class)?,
        DataSource::Files { train, test } => (load_features(train)?, load_features(test)?),
    };
    train.validate_for_training()?;
    if train.d != test.d {
        return Err(metricscope_core::Error::Shape {
            expected: train.d,
            actual: test.d,
        }
        .into());
    }
    Ok((train.to_labeled_set()?, test.to_labeled_set()?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(metricscope_core::Error::from)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Runs one experiment and writes its artifacts into `cfg.out_dir`.
///
/// On failure the completed epochs are still flushed to the log and the
/// summary file carries a [`FailureMarker`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let start = Instant::now();
    let hash = cfg.hash();
    let mut log = TrainLog::new(cfg.loss.name(), hash.clone(), cfg.seed);

    let result = train_and_evaluate(cfg, &mut log);
    log.save_csv(&out.join(LOG_FILE))?;
    let mut summary = match result {
        Ok(summary) => summary,
        Err(e) => {
            warn!("{} run failed after {} epochs: {e}", cfg.loss, log.records.len());
            let marker = FailureMarker {
                status: "failed".into(),
                library_version: VERSION.into(),
                config_hash: hash,
                epochs_completed: log.records.len(),
                error: e.to_string(),
            };
            write_json(&out.join(SUMMARY_FILE), &marker)?;
            return Err(e);
        }
    };
    summary.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    write_json(
        &out.join(TIMING_FILE),
        &Timing {
            wall_clock_seconds: summary.wall_clock_seconds,
        },
    )?;
    info!(
        "{} finished {} epochs in {:.1}s",
        cfg.loss, summary.epochs_completed, summary.wall_clock_seconds
    );
    Ok(summary)
}

fn train_and_evaluate(cfg: &ExperimentConfig, log: &mut TrainLog) -> Result<ExperimentSummary> {
    let (train, test) = load_data(&cfg.data)?;
    let settings = TrainSettings {
        loss: cfg.loss,
        loss_config: cfg.loss_config,
        optimizer: cfg.optimizer,
        plan: cfg.plan(),
        seed: cfg.seed,
    };
    let mut trainer = Trainer::new(settings, cfg.head.dims(train.dim()), cfg.head.dropout, &train.classes())?;
    trainer.fit(&train, &test, cfg.epochs, cfg.snapshot_interval, log)?;

    let dump = FeatureDataset::from_labeled_set(&trainer.embed(&test)?, Split::Test)?;
    save_features(&dump, &cfg.out_dir.join(EMBEDDINGS_FILE))?;
    save_checkpoint(&cfg.out_dir.join(CHECKPOINT_DIR), &trainer.head, &trainer.adam)?;
    let (final_report, recall) = diagnose(&dump, &cfg.recall_ks)?;

    Ok(ExperimentSummary {
        status: "completed".into(),
        library_version: VERSION.into(),
        config_hash: log.config_hash.clone(),
        config: cfg.clone(),
        epochs_completed: log.records.len(),
        initial: log.snapshots[0].report.clone(),
        final_report,
        snapshots: log.snapshots.clone(),
        greediness: if log.records.is_empty() {
            None
        } else {
            Some(summarize_greediness(log)?)
        },
        recall,
        wall_clock_seconds: 0.0,
    })
}

/// L2-normalizes stored embeddings unless they are already unit length.
pub fn unit_embeddings(ds: &FeatureDataset) -> Result<LabeledSet> {
    let set = ds.to_labeled_set()?;
    if set.is_normalized() {
        Ok(set)
    } else {
        info!("embeddings are not unit length, normalizing");
        Ok(set.normalized()?)
    }
}

/// Variance and recall diagnostics of stored embeddings.
pub fn diagnose(ds: &FeatureDataset, ks: &[usize]) -> Result<(VarianceReport, RecallReport)> {
    let set = unit_embeddings(ds)?;
    Ok((cosine_distance_stats(&set)?, recall_at_k(&set, ks)?))
}

pub fn evaluate(ds: &FeatureDataset, ks: &[usize]) -> Result<RecallReport> {
    Ok(recall_at_k(&unit_embeddings(ds)?, ks)?)
}

/// Reads a run's `summary.json`, which may be a failure marker.
pub fn read_summary(dir: &Path) -> Result<std::result::Result<ExperimentSummary, FailureMarker>> {
    let path: PathBuf = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(metricscope_core::Error::from)?;
    let parsed = if value["status"] == "completed" {
        Ok(serde_json::from_value(value).map_err(metricscope_core::Error::from)?)
    } else {
        Err(serde_json::from_value(value).map_err(metricscope_core::Error::from)?)
    };
    Ok(parsed)
}
