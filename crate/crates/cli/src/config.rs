//! Experiment configuration files.
//!
//! Configs are JSON documents matching `config.schema.json`. Unknown keys
//! are rejected at every level.

use std::fs;
use std::path::{Path, PathBuf};

use metricscope_core::data::load_features;
use metricscope_core::{AdamConfig, BatchPlan, BatchStrategy, HeadDims, LossConfig, LossKind, Preset, SyntheticSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Default number of held-out draws per class for synthetic data.
pub const TEST_PER_CLASS: usize = 20;
pub const DEFAULT_EPOCHS: usize = 100;
pub const DESK_EPOCHS: usize = 50;
pub const DESK_BATCH: usize = 64;
pub const FULL_SCALE_BATCH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub hidden: usize,
    pub output: usize,
    pub dropout: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            hidden: 128,
            output: 32,
            dropout: 0.15,
        }
    }
}

impl HeadConfig {
    pub fn full_scale() -> Self {
        HeadConfig {
            hidden: 512,
            output: 128,
            dropout: 0.15,
        }
    }

    pub fn dims(&self, d_in: usize) -> HeadDims {
        HeadDims::new(d_in, self.hidden, self.output)
    }
}

/// Batch layout; the sampler seed comes from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub strategy: BatchStrategy,
    pub classes_per_batch: usize,
    pub samples_per_class: usize,
}

impl BatchConfig {
    /// Class-balanced layout of roughly `batch_size` samples: `P = min(C, cap)`
    /// classes with `K = batch_size / P` samples each, or two per class for
    /// N-pair.
    pub fn for_batch_size(loss: LossKind, classes: usize, batch_size: usize) -> Self {
        if loss == LossKind::Npair {
            return BatchConfig {
                strategy: BatchStrategy::NpairPairs,
                classes_per_batch: (batch_size / 2).min(classes),
                samples_per_class: 2,
            };
        }
        let cap = if batch_size >= FULL_SCALE_BATCH { 128 } else { 16 };
        let p = classes.min(cap).max(1);
        BatchConfig {
            strategy: BatchStrategy::PkBalanced,
            classes_per_batch: p,
            samples_per_class: (batch_size / p).max(2),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.classes_per_batch * self.samples_per_class
    }

    pub fn plan(&self, seed: u64) -> BatchPlan {
        BatchPlan {
            strategy: self.strategy,
            classes_per_batch: self.classes_per_batch,
            samples_per_class: self.samples_per_class,
            batch_size: self.batch_size(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec, test_per_class: usize },
    Files { train: PathBuf, test: PathBuf },
}

impl DataSource {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        DataSource::Synthetic {
            spec: preset.spec(seed),
            test_per_class: TEST_PER_CLASS,
        }
    }

    /// Number of training classes; reads the label file for file sources.
    pub fn class_count(&self) -> Result<usize> {
        match self {
            DataSource::Synthetic { spec, .. } => Ok(spec.class_count),
            DataSource::Files { train, .. } => Ok(load_features(train)?.class_count()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub loss: LossKind,
    #[serde(default)]
    pub loss_config: LossConfig,
    #[serde(default)]
    pub head: HeadConfig,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub batch: BatchConfig,
    pub data: DataSource,
    pub seed: u64,
    /// Variance snapshot every this many epochs; 0 records only the first
    /// and last.
    #[serde(default)]
    pub snapshot_interval: usize,
    #[serde(default = "default_ks")]
    pub recall_ks: Vec<usize>,
    pub out_dir: PathBuf,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_ks() -> Vec<usize> {
    metricscope_core::retrieval::DEFAULT_KS.to_vec()
}

impl ExperimentConfig {
    /// Desk-scale run on a synthetic preset: batch 64, 50 epochs.
    pub fn desk(loss: LossKind, preset: Preset, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        let spec = preset.spec(seed);
        ExperimentConfig {
            loss,
            loss_config: LossConfig::default(),
            head: HeadConfig::default(),
            optimizer: AdamConfig::default(),
            epochs: DESK_EPOCHS,
            batch: BatchConfig::for_batch_size(loss, spec.class_count, DESK_BATCH),
            data: DataSource::preset(preset, seed),
            seed,
            snapshot_interval: 10,
            recall_ks: default_ks(),
            out_dir: out_dir.into(),
        }
    }

    /// Switches to 100 epochs, batch 512 and a 512→128 head.
    pub fn into_full_scale(mut self) -> Result<Self> {
        let classes = self.data.class_count()?;
        self.epochs = DEFAULT_EPOCHS;
        self.batch = BatchConfig::for_batch_size(self.loss, classes, FULL_SCALE_BATCH);
        self.head = HeadConfig::full_scale();
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn plan(&self) -> BatchPlan {
        self.batch.plan(self.seed)
    }

    /// SHA-256 over the config with `out_dir` blanked, hex encoded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: metricscope_core::Error| CliError::Config(e.to_string());
        self.loss_config.validate().map_err(config)?;
        self.optimizer.validate().map_err(config)?;
        self.plan().validate().map_err(config)?;

        if self.head.hidden == 0 || self.head.output == 0 {
            return Err(CliError::Config("head dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.head.dropout) {
            return Err(CliError::Config(format!(
                "dropout {} outside [0, 1)",
                self.head.dropout
            )));
        }
        let wants = match self.loss {
            LossKind::Npair => Some(BatchStrategy::NpairPairs),
            LossKind::Triplet | LossKind::Infonce | LossKind::Scl => Some(BatchStrategy::PkBalanced),
            _ => None,
        };
        if let Some(strategy) = wants {
            if self.batch.strategy != strategy {
                return Err(CliError::Config(format!(
                    "{} needs the {strategy:?} batch strategy, got {:?}",
                    self.loss, self.batch.strategy
                )));
            }
        }
        if self.recall_ks.is_empty() || self.recall_ks.contains(&0) {
            return Err(CliError::Config("recall_ks must be non-empty and positive".into()));
        }
        match &self.data {
            DataSource::Synthetic { spec, test_per_class } => {
                spec.validate().map_err(config)?;
                if *test_per_class < 2 {
                    return Err(CliError::Config("test_per_class must be at least 2".into()));
                }
                if self.batch.classes_per_batch > spec.class_count {
                    return Err(CliError::Config(format!(
                        "batch draws {} classes but the data has {}",
                        self.batch.classes_per_batch, spec.class_count
                    )));
                }
            }
            DataSource::Files { train, test } => {
                for path in [train, test] {
                    if !path.exists() {
                        return Err(CliError::Config(format!("{} does not exist", path.display())));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A suite file is a JSON array of experiment configs.
pub fn load_suite(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_layout() {
        let cfg = ExperimentConfig::desk(LossKind::Triplet, Preset::Desk, 1, "out");
        assert_eq!((cfg.batch.classes_per_batch, cfg.batch.samples_per_class), (16, 4));
        assert_eq!(cfg.epochs, 50);
        cfg.validate().unwrap();

        let npair = ExperimentConfig::desk(LossKind::Npair, Preset::Desk, 1, "out");
        assert_eq!(npair.batch.strategy, BatchStrategy::NpairPairs);
        assert_eq!(npair.batch.classes_per_batch, 20);
        npair.validate().unwrap();

        let coarse = ExperimentConfig::desk(LossKind::Scl, Preset::Coarse, 1, "out");
        assert_eq!(
            (coarse.batch.classes_per_batch, coarse.batch.samples_per_class),
            (10, 6)
        );
    }

    #[test]
    fn full_scale_layout() {
        let cfg = ExperimentConfig::desk(LossKind::Contrastive, Preset::Fine, 1, "out")
            .into_full_scale()
            .unwrap();
        assert_eq!(cfg.batch.batch_size(), 500);
        assert_eq!(cfg.epochs, 100);
        assert_eq!(cfg.head.hidden, 512);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = ExperimentConfig::desk(LossKind::Infonce, Preset::Desk, 1, "out");
        let mut value = serde_json::to_value(&cfg).unwrap();
        value["loss_config"]["temprature"] = 0.1.into();
        let err = ExperimentConfig::from_json(&value.to_string()).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn defaults_fill_optional_fields() {
        let text = r#"{
            "loss": "scl",
            "batch": {"strategy": "pk_balanced", "classes_per_batch": 4, "samples_per_class": 2},
            "data": {"kind": "synthetic", "test_per_class": 3,
                     "spec": {"class_count": 4, "samples_per_class": 5, "dim": 6,
                              "center_scale": 1.0, "within_std": 0.2, "seed": 1}},
            "seed": 7,
            "out_dir": "runs/x"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.epochs, DEFAULT_EPOCHS);
        assert_eq!(cfg.loss_config, LossConfig::default());
        assert_eq!(cfg.recall_ks, vec![1, 5, 10]);
        cfg.validate().unwrap();
    }

    #[test]
    fn mismatched_strategy_is_a_config_error() {
        let mut cfg = ExperimentConfig::desk(LossKind::Npair, Preset::Desk, 1, "out");
        cfg.batch = BatchConfig::for_batch_size(LossKind::Triplet, 20, 64);
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::desk(LossKind::Ccl, Preset::Desk, 1, "a");
        let b = ExperimentConfig::desk(LossKind::Ccl, Preset::Desk, 1, "b");
        let c = ExperimentConfig::desk(LossKind::Ccl, Preset::Desk, 2, "a");
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn missing_files_fail_validation() {
        let mut cfg = ExperimentConfig::desk(LossKind::Triplet, Preset::Desk, 1, "out");
        cfg.data = DataSource::Files {
            train: "/nonexistent/train.json".into(),
            test: "/nonexistent/test.json".into(),
        };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
