#![allow(dead_code)]

use metricscope_core::data::generate_synthetic;
use metricscope_core::{LabeledSet, SyntheticSpec};

/// `classes × per_class` unit vectors in `dim` dimensions.
pub fn unit_set(classes: usize, per_class: usize, dim: usize, seed: u64) -> LabeledSet {
    let spec = SyntheticSpec {
        class_count: classes,
        samples_per_class: per_class,
        dim,
        center_scale: 1.0,
        within_std: 0.5,
        seed,
    };
    generate_synthetic(&spec)
        .and_then(|ds| ds.to_labeled_set())
        .and_then(|set| set.normalized())
        .expect("synthetic set")
}

/// Raw (unnormalized) features.
pub fn feature_set(classes: usize, per_class: usize, dim: usize, seed: u64) -> LabeledSet {
    let spec = SyntheticSpec {
        class_count: classes,
        samples_per_class: per_class,
        dim,
        center_scale: 1.0,
        within_std: 0.5,
        seed,
    };
    generate_synthetic(&spec)
        .and_then(|ds| ds.to_labeled_set())
        .expect("synthetic set")
}
