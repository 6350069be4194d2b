mod common;

use common::{to_set, Case};
use metricscope_core::model::Mode;
use metricscope_core::{seeded_rng, HeadDims, LabeledSet, LossConfig, LossKind, ProjectionHead};
use metricscope_oracles::{central_gradient, max_relative_error, random_gaussian, FD_FLOOR, FD_STEP};
use rand::Rng;

const STEP: f64 = FD_STEP;
const FLOOR: f64 = FD_FLOOR;
const TOLERANCE: f64 = 1e-4;

fn embedding_error(kind: LossKind, case: &Case, cfg: &LossConfig) -> f64 {
    let out = case.eval(kind, cfg);
    let dim = case.rows[0].len();
    let flat: Vec<f64> = case.rows.concat();
    let numeric = central_gradient(
        |x| {
            let set = LabeledSet::new(dim, x.to_vec(), case.labels.clone()).unwrap();
            kind.evaluate(&set, case.bank.as_ref(), cfg).unwrap().value
        },
        &flat,
        STEP,
    );
    max_relative_error(&out.grad_embeddings, &numeric, FLOOR)
}

fn bank_error(kind: LossKind, case: &Case, cfg: &LossConfig) -> f64 {
    let out = case.eval(kind, cfg);
    let bank = case.bank.as_ref().unwrap();
    let set = case.set();
    let numeric = central_gradient(
        |x| {
            let mut probe = bank.clone();
            probe.values_mut().copy_from_slice(x);
            kind.evaluate(&set, Some(&probe), cfg).unwrap().value
        },
        bank.values(),
        STEP,
    );
    max_relative_error(out.grad_params.as_deref().unwrap(), &numeric, FLOOR)
}

#[test]
fn embedding_gradients_match_finite_differences() {
    let cfg = LossConfig::default();
    for kind in LossKind::ALL {
        let mut rng = seeded_rng(11, kind as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let dim = rng.random_range(2..=8);
            worst = worst.max(embedding_error(kind, &Case::random(&mut rng, kind, dim), &cfg));
        }
        assert!(worst < TOLERANCE, "{kind}: max relative error {worst:e}");
    }
}

#[test]
fn bank_gradients_match_finite_differences() {
    let cfg = LossConfig::default();
    for kind in [LossKind::Arcface, LossKind::Ccl] {
        let mut rng = seeded_rng(12, kind as u64);
        for _ in 0..20 {
            let dim = rng.random_range(2..=8);
            let err = bank_error(kind, &Case::random(&mut rng, kind, dim), &cfg);
            assert!(err < TOLERANCE, "{kind} bank: max relative error {err:e}");
        }
    }
}

#[test]
fn non_default_hyperparameters_keep_gradients_exact() {
    let cfg = LossConfig {
        margin: 0.3,
        temperature: 0.5,
        center_weight: 0.0,
        arcface_margin: 0.2,
        arcface_scale: 8.0,
        ..LossConfig::default()
    };
    for kind in LossKind::ALL {
        let mut rng = seeded_rng(13, kind as u64);
        for _ in 0..5 {
            let case = Case::random(&mut rng, kind, 5);
            let err = embedding_error(kind, &case, &cfg);
            assert!(err < TOLERANCE, "{kind}: {err:e}");
            if kind.uses_bank() {
                let err = bank_error(kind, &case, &cfg);
                assert!(err < TOLERANCE, "{kind} bank: {err:e}");
            }
        }
    }
}

/// features → 4→3→2 head → loss → backward, against differences over all
/// head parameters.
#[test]
fn head_parameter_gradients_match_finite_differences() {
    let cfg = LossConfig::default();
    let dims = HeadDims::new(4, 3, 2);
    for kind in LossKind::ALL {
        let mut rng = seeded_rng(14, kind as u64);
        for trial in 0..5 {
            let labels = loop {
                let l = common::random_labels(&mut rng, kind);
                if l.len() <= 8 {
                    break l;
                }
            };
            let features = to_set(&random_gaussian(&mut rng, labels.len(), 4), &labels);
            let head = ProjectionHead::new(dims, 0.0, trial).unwrap();
            let bank = kind.uses_bank().then(|| {
                let classes = features.classes();
                metricscope_core::CenterBank::random(2, &classes, &mut rng).unwrap()
            });

            let (z, cache) = head.forward(&features, Mode::Training, 0).unwrap();
            let out = kind.evaluate(&z, bank.as_ref(), &cfg).unwrap();
            let grads = head.backward(&cache, &out.grad_embeddings).unwrap();

            for (slot, name) in ["w1", "b1", "w2", "b2"].iter().enumerate() {
                let start = head.params()[slot].to_vec();
                let numeric = central_gradient(
                    |x| {
                        let mut probe = head.clone();
                        probe.params_mut()[slot].copy_from_slice(x);
                        let z = probe.embed(&features).unwrap();
                        kind.evaluate(&z, bank.as_ref(), &cfg).unwrap().value
                    },
                    &start,
                    STEP,
                );
                let analytic = &grads.group(name).unwrap().values;
                let err = max_relative_error(analytic, &numeric, FLOOR);
                assert!(err < TOLERANCE, "{kind} {name}: {err:e}");
            }
        }
    }
}

#[test]
fn dropout_mask_is_a_function_of_the_seed() {
    let mut rng = seeded_rng(15, 0);
    let features = to_set(&random_gaussian(&mut rng, 6, 5), &[0, 0, 1, 1, 2, 2]);
    let head = ProjectionHead::new(HeadDims::new(5, 16, 3), 0.5, 3).unwrap();
    let (a, _) = head.forward(&features, Mode::Training, 99).unwrap();
    let (b, _) = head.forward(&features, Mode::Training, 99).unwrap();
    let (c, _) = head.forward(&features, Mode::Training, 100).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
    let inference = head.embed(&features).unwrap();
    assert_eq!(inference, head.embed(&features).unwrap());
    assert!(inference.is_normalized());
}

#[test]
fn dropout_backward_matches_differences_for_fixed_mask() {
    let mut rng = seeded_rng(16, 0);
    let labels = [0, 0, 1, 1, 2, 2];
    let features = to_set(&random_gaussian(&mut rng, 6, 4), &labels);
    let head = ProjectionHead::new(HeadDims::new(4, 6, 3), 0.3, 8).unwrap();
    let cfg = LossConfig::default();
    let (z, cache) = head.forward(&features, Mode::Training, 5).unwrap();
    let out = LossKind::Infonce.evaluate(&z, None, &cfg).unwrap();
    let grads = head.backward(&cache, &out.grad_embeddings).unwrap();
    let start = head.params()[0].to_vec();
    let numeric = central_gradient(
        |x| {
            let mut probe = head.clone();
            probe.params_mut()[0].copy_from_slice(x);
            let (z, _) = probe.forward(&features, Mode::Training, 5).unwrap();
            LossKind::Infonce.evaluate(&z, None, &cfg).unwrap().value
        },
        &start,
        STEP,
    );
    let err = max_relative_error(&grads.group("w1").unwrap().values, &numeric, FLOOR);
    assert!(err < TOLERANCE, "{err:e}");
}
