mod common;

use common::to_set;
use metricscope_core::data::{generate_split, load_features, plan_epoch, save_features};
use metricscope_core::diagnostics::{centroid_variance, cosine_distance_stats};
use metricscope_core::math::{cosine_distance, euclidean_distance, l2_normalize};
use metricscope_core::model::{load_checkpoint, save_checkpoint};
use metricscope_core::retrieval::recall_at_k;
use metricscope_core::{
    seeded_rng, AdamConfig, AdamState, BatchPlan, FeatureDataset, HeadDims, Preset, ProjectionHead, Split,
    SyntheticSpec,
};
use metricscope_oracles::{random_unit, random_units};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn triangle_inequality(dim in 1usize..8, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed, 0);
        let [a, b, c] = [0, 1, 2].map(|_| {
            let v = random_unit(&mut rng, dim);
            v.into_iter().map(|x| x * 3.0).collect::<Vec<f64>>()
        });
        let ab = euclidean_distance(&a, &b).unwrap();
        let bc = euclidean_distance(&b, &c).unwrap();
        let ac = euclidean_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn cosine_is_half_squared_euclidean_on_the_sphere(seed in any::<u64>(), dim in 1usize..10) {
        let mut rng = seeded_rng(seed, 1);
        let a = random_unit(&mut rng, dim);
        let b = random_unit(&mut rng, dim);
        let d = euclidean_distance(&a, &b).unwrap();
        prop_assert!((cosine_distance(&a, &b).unwrap() - d * d / 2.0).abs() <= 1e-9);
    }

    #[test]
    fn normalization_is_idempotent(v in vector(6)) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let once = l2_normalize(&v).unwrap();
        let twice = l2_normalize(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn recall_never_decreases_with_k(seed in any::<u64>(), n in 12usize..60, classes in 2u32..8) {
        let mut rng = seeded_rng(seed, 2);
        let labels: Vec<u32> = (0..n as u32).map(|i| i % classes).collect();
        let set = to_set(&random_units(&mut rng, n, 3), &labels);
        let report = recall_at_k(&set, &[1, 2, 3, 5, 10, 11]).unwrap();
        let values: Vec<f64> = report.recall_at_k.values().copied().collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn diagnostics_ignore_sample_order(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed, 3);
        let labels: Vec<u32> = (0..24).map(|i| i % 3).collect();
        let rows = random_units(&mut rng, 24, 4);
        let mut order: Vec<usize> = (0..24).collect();
        order.shuffle(&mut rng);
        let set = to_set(&rows, &labels);
        let shuffled = set.select(&order).unwrap();

        let a = centroid_variance(&set);
        let b = centroid_variance(&shuffled);
        prop_assert!((a.intra - b.intra).abs() < 1e-12);
        prop_assert!((a.inter.unwrap() - b.inter.unwrap()).abs() < 1e-12);
        let a = cosine_distance_stats(&set).unwrap();
        let b = cosine_distance_stats(&shuffled).unwrap();
        prop_assert!((a.intra_mean - b.intra_mean).abs() < 1e-12);
        prop_assert!((a.inter_var.unwrap() - b.inter_var.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn feature_files_round_trip_bit_exactly(
        d in 1usize..6,
        values in prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), 1..60),
    ) {
        let n = values.len() / d;
        prop_assume!(n > 0);
        let features = values[..n * d].to_vec();
        let labels: Vec<u32> = (0..n as u32).map(|i| i.wrapping_mul(2_654_435_761)).collect();
        let ds = FeatureDataset::new(d, features, labels, Split::Test).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.json");
        save_features(&ds, &path).unwrap();
        let back = load_features(&path).unwrap();
        prop_assert_eq!(
            back.features.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            ds.features.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(back.labels, ds.labels);
    }

    #[test]
    fn every_sample_is_drawn_each_epoch(
        seed in any::<u64>(),
        epoch in 0u64..5,
        classes in 2u32..10,
        per in 1usize..9,
        p in 1usize..4,
        k in 2usize..5,
    ) {
        prop_assume!(p <= classes as usize);
        let labels: Vec<u32> = (0..classes).flat_map(|c| std::iter::repeat_n(c, per)).collect();
        let batches = plan_epoch(&labels, &BatchPlan::pk(p, k, seed), epoch).unwrap();
        let mut seen = vec![false; labels.len()];
        for batch in &batches {
            prop_assert_eq!(batch.len(), p * k);
            let mut counts = std::collections::BTreeMap::new();
            for &i in batch {
                seen[i] = true;
                *counts.entry(labels[i]).or_insert(0usize) += 1;
            }
            prop_assert_eq!(counts.len(), p);
            prop_assert!(counts.values().all(|&c| c == k));
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert_eq!(&batches, &plan_epoch(&labels, &BatchPlan::pk(p, k, seed), epoch).unwrap());
    }
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let dims = HeadDims::new(5, 7, 3);
    let mut head = ProjectionHead::new(dims, 0.15, 4).unwrap();
    let mut adam = AdamState::new(AdamConfig::default(), &dims.shapes());
    let mut rng = seeded_rng(60, 0);
    let labels = [0, 0, 1, 1, 2, 2];
    let features = to_set(&metricscope_oracles::random_gaussian(&mut rng, 6, 5), &labels);
    for step in 0..3 {
        let (z, cache) = head.forward(&features, metricscope_core::Mode::Training, step).unwrap();
        let out = metricscope_core::LossKind::Scl
            .evaluate(&z, None, &Default::default())
            .unwrap();
        let grads = head.backward(&cache, &out.grad_embeddings).unwrap();
        head.apply_adam(&mut adam, &grads).unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &head, &adam).unwrap();
    let (head2, adam2) = load_checkpoint(dir.path()).unwrap();
    let bits =
        |h: &ProjectionHead| -> Vec<u64> { h.params().iter().flat_map(|p| p.iter().map(|x| x.to_bits())).collect() };
    assert_eq!(bits(&head), bits(&head2));
    assert_eq!(head2.dims(), dims);
    assert_eq!(head2.dropout_rate(), 0.15);
    assert_eq!(adam, adam2);
    assert_eq!(adam2.step, 3);
}

#[test]
fn synthetic_spread_is_close_to_requested() {
    for preset in [Preset::Fine, Preset::Coarse, Preset::Desk] {
        let spec = preset.spec(9);
        let (train, test) = generate_split(&spec, 10).unwrap();
        for ds in [&train, &test] {
            let set = ds.to_labeled_set().unwrap();
            // Pooled within-class standard deviation per coordinate.
            let centroids = metricscope_core::math::class_centroids(&set);
            let mut sum = 0.0;
            for (i, row) in set.rows().enumerate() {
                let mu = &centroids[&set.label(i)];
                sum += row.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
            let std = (sum / (set.len() * set.dim()) as f64).sqrt();
            let ratio = std / spec.within_std;
            assert!((0.85..=1.15).contains(&ratio), "{preset:?}: std ratio {ratio}");
        }
        assert_eq!(train.class_count(), spec.class_count);
        assert_eq!(train.n, spec.class_count * spec.samples_per_class);
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let spec = SyntheticSpec {
        class_count: 3,
        samples_per_class: 4,
        dim: 5,
        center_scale: 2.0,
        within_std: 0.1,
        seed: 17,
    };
    let (a, at) = generate_split(&spec, 3).unwrap();
    let (b, bt) = generate_split(&spec, 3).unwrap();
    assert_eq!((a, at), (b, bt));
    let other = generate_split(&SyntheticSpec { seed: 18, ..spec }, 3).unwrap();
    assert_ne!(other.0.features, generate_split(&spec, 3).unwrap().0.features);
}
