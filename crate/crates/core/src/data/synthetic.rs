use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureDataset, Split};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

const CENTER_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;

/// Isotropic Gaussian clusters around uniformly drawn class centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub samples_per_class: usize,
    pub dim: usize,
    /// Centers are uniform in `±center_scale` per coordinate.
    pub center_scale: f64,
    pub within_std: f64,
    pub seed: u64,
}

/// Named synthetic configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Many classes, low separation-to-spread ratio.
    Fine,
    /// Few, well separated classes.
    Coarse,
    /// Middle ground used by the default suite.
    Desk,
}

impl Preset {
    pub fn spec(self, seed: u64) -> SyntheticSpec {
        let (class_count, samples_per_class, center_scale, within_std) = match self {
            Preset::Fine => (50, 20, 1.0, 0.6),
            Preset::Coarse => (10, 100, 3.0, 0.5),
            Preset::Desk => (20, 50, 1.0, 0.5),
        };
        SyntheticSpec {
            class_count,
            samples_per_class,
            dim: 64,
            center_scale,
            within_std,
            seed,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(Preset::Fine),
            "coarse" => Ok(Preset::Coarse),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Parameter(format!("unknown preset {other:?}"))),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 || self.samples_per_class < 2 || self.dim < 2 {
            return Err(Error::Parameter(
                "synthetic spec needs at least 2 classes, 2 samples per class and dimension 2".into(),
            ));
        }
        if !(self.within_std >= 0.0) || !(self.center_scale >= 0.0) {
            return Err(Error::Parameter(
                "within_std and center_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn centers(&self) -> Vec<f64> {
        let mut rng = seeded_rng(self.seed, CENTER_STREAM);
        let s = self.center_scale;
        (0..self.class_count * self.dim)
            .map(|_| if s > 0.0 { rng.random_range(-s..s) } else { 0.0 })
            .collect()
    }

    fn sample(&self, centers: &[f64], per_class: usize, stream: u64, split: Split) -> Result<FeatureDataset> {
        let mut rng = seeded_rng(self.seed, stream);
        let mut features = Vec::with_capacity(self.class_count * per_class * self.dim);
        let mut labels = Vec::with_capacity(self.class_count * per_class);
        for class in 0..self.class_count {
            let center = &centers[class * self.dim..(class + 1) * self.dim];
            for _ in 0..per_class {
                for &c in center {
                    let noise: f64 = rng.sample(StandardNormal);
                    features.push((c + self.within_std * noise) as f32);
                }
                labels.push(class as u32);
            }
        }
        FeatureDataset::new(self.dim, features, labels, split)
    }
}

/// Class-major dataset: class `c` owns rows `c·n_c .. (c+1)·n_c`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureDataset> {
    spec.validate()?;
    spec.sample(&spec.centers(), spec.samples_per_class, TRAIN_STREAM, Split::Train)
}

/// Train set per `spec` plus a held-out set of `test_per_class` draws
/// around the same centers.
pub fn generate_split(spec: &SyntheticSpec, test_per_class: usize) -> Result<(FeatureDataset, FeatureDataset)> {
    spec.validate()?;
    if test_per_class < 2 {
        return Err(Error::Parameter("test split needs at least 2 samples per class".into()));
    }
    let centers = spec.centers();
    let train = spec.sample(&centers, spec.samples_per_class, TRAIN_STREAM, Split::Train)?;
    let test = spec.sample(&centers, test_per_class, TEST_STREAM, Split::Test)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(std: f64) -> SyntheticSpec {
        SyntheticSpec {
            class_count: 3,
            samples_per_class: 4,
            dim: 5,
            center_scale: 2.0,
            within_std: std,
            seed: 9,
        }
    }

    #[test]
    fn zero_spread_collapses_to_centers() {
        let ds = generate_synthetic(&spec(0.0)).unwrap();
        for class in 0..3 {
            let first = ds.row(class * 4).to_vec();
            for i in 1..4 {
                assert_eq!(ds.row(class * 4 + i), first.as_slice());
            }
        }
        assert_eq!(ds.labels, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        assert_eq!(
            generate_synthetic(&spec(0.5)).unwrap(),
            generate_synthetic(&spec(0.5)).unwrap()
        );
        let other = SyntheticSpec { seed: 10, ..spec(0.5) };
        assert_ne!(
            generate_synthetic(&spec(0.5)).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn split_shares_centers() {
        let s = spec(0.0);
        let (train, test) = generate_split(&s, 2).unwrap();
        assert_eq!(train.row(0), test.row(0));
        assert_eq!(test.n, 6);
        assert_eq!(test.split, Split::Test);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&SyntheticSpec {
            class_count: 1,
            ..spec(0.1)
        })
        .is_err());
        assert!(generate_synthetic(&SyntheticSpec {
            within_std: -1.0,
            ..spec(0.1)
        })
        .is_err());
    }
}
