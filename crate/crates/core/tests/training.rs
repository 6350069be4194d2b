use metricscope_core::data::generate_split;
use metricscope_core::diagnostics::summarize_greediness;
use metricscope_core::math::is_unit;
use metricscope_core::{
    AdamConfig, BatchPlan, HeadDims, LabeledSet, LossConfig, LossKind, SyntheticSpec, TrainLog, TrainSettings, Trainer,
};

fn data() -> (LabeledSet, LabeledSet) {
    let spec = SyntheticSpec {
        class_count: 6,
        samples_per_class: 12,
        dim: 8,
        center_scale: 2.0,
        within_std: 0.4,
        seed: 3,
    };
    let (train, test) = generate_split(&spec, 4).unwrap();
    (train.to_labeled_set().unwrap(), test.to_labeled_set().unwrap())
}

fn settings(loss: LossKind) -> TrainSettings {
    let plan = if loss == LossKind::Npair {
        BatchPlan::npair(4, 5)
    } else {
        BatchPlan::pk(4, 3, 5)
    };
    TrainSettings {
        loss,
        loss_config: LossConfig::default(),
        optimizer: AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        },
        plan,
        seed: 5,
    }
}

fn train(loss: LossKind, epochs: usize) -> (Trainer, TrainLog) {
    let (train, test) = data();
    let mut trainer = Trainer::new(settings(loss), HeadDims::new(8, 16, 4), 0.15, &train.classes()).unwrap();
    let mut log = TrainLog::new(loss.name(), "test", 5);
    trainer.fit(&train, &test, epochs, 2, &mut log).unwrap();
    (trainer, log)
}

#[test]
fn every_loss_trains_deterministically() {
    for loss in LossKind::ALL {
        let (a, log_a) = train(loss, 3);
        let (b, log_b) = train(loss, 3);
        assert_eq!(log_a.records, log_b.records, "{loss}");
        assert_eq!(a.head.params(), b.head.params(), "{loss}");
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        log_a.write_csv(&mut csv_a).unwrap();
        log_b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        for r in &log_a.records {
            assert!(r.loss.is_finite() && r.grad_norm.is_finite(), "{loss}");
            assert!((0.0..=1.0).contains(&r.active_ratio));
        }
    }
}

#[test]
fn snapshots_cover_start_interval_and_end() {
    let (_, log) = train(LossKind::Triplet, 5);
    let epochs: Vec<usize> = log.snapshots.iter().map(|s| s.epoch).collect();
    assert_eq!(epochs, vec![0, 2, 4, 5]);
    assert_eq!(log.records.len(), 5);
    assert!(summarize_greediness(&log).unwrap().mean_grad_norm > 0.0);
}

#[test]
fn zero_epochs_keeps_only_the_initial_snapshot() {
    let (_, log) = train(LossKind::Contrastive, 0);
    assert!(log.records.is_empty());
    assert_eq!(log.snapshots.len(), 1);
}

#[test]
fn centers_stay_on_the_sphere() {
    for loss in [LossKind::Arcface, LossKind::Ccl] {
        let (trainer, _) = train(loss, 4);
        let bank = trainer.bank.as_ref().unwrap();
        assert_eq!(bank.len(), 6);
        assert!((0..bank.len()).all(|k| is_unit(bank.row(k))), "{loss}");
    }
}

#[test]
fn triplet_training_reduces_the_loss() {
    let (_, log) = train(LossKind::Triplet, 20);
    let first = log.records.first().unwrap().loss;
    let last = log.records.last().unwrap().loss;
    assert!(last < first, "{first} -> {last}");
}
