//! Feature datasets: file ingestion, synthetic generation, batch sampling.

mod format;
mod sampler;
mod synthetic;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use format::{load_features, read_tensor_f64, save_features, write_tensor_f64, FeatureManifest, FORMAT_VERSION};
pub use sampler::{plan_epoch, sample_batches, BatchPlan, BatchStrategy};
pub use synthetic::{generate_split, generate_synthetic, Preset, SyntheticSpec};

use crate::error::{Error, Result};
use crate::math::LabeledSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// An `n × d` feature matrix with one class id per row.
///
/// Values are stored as `f32`, matching the on-disk format, so a
/// save/load cycle is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub n: usize,
    pub d: usize,
    pub features: Vec<f32>,
    pub labels: Vec<u32>,
    pub split: Split,
}

impl FeatureDataset {
    pub fn new(d: usize, features: Vec<f32>, labels: Vec<u32>, split: Split) -> Result<Self> {
        let n = labels.len();
        if d == 0 || n == 0 {
            return Err(Error::Parameter(
                "dataset must be non-empty with positive dimension".into(),
            ));
        }
        if features.len() != n * d {
            return Err(Error::Shape {
                expected: n * d,
                actual: features.len(),
            });
        }
        if let Some(index) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(FeatureDataset {
            n,
            d,
            features,
            labels,
            split,
        })
    }

    /// Rounds `set` to `f32`.
    pub fn from_labeled_set(set: &LabeledSet, split: Split) -> Result<Self> {
        let features = set.values().iter().map(|&x| x as f32).collect();
        Self::new(set.dim(), features, set.labels().to_vec(), split)
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn to_labeled_set(&self) -> Result<LabeledSet> {
        LabeledSet::new(
            self.d,
            self.features.iter().map(|&x| f64::from(x)).collect(),
            self.labels.clone(),
        )
    }

    /// Checks that the set can drive training: at least two classes.
    pub fn validate_for_training(&self) -> Result<()> {
        let classes = self.class_count();
        if classes < 2 || self.n < classes {
            return Err(Error::Parameter(format!(
                "training set needs n ≥ C ≥ 2, got n = {}, C = {classes}",
                self.n
            )));
        }
        Ok(())
    }
}
