#![allow(dead_code)]

use metricscope_core::{CenterBank, LabeledSet, LossConfig, LossKind, LossOutput};
use metricscope_oracles::{random_units, Rows};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn to_set(rows: &Rows, labels: &[u32]) -> LabeledSet {
    LabeledSet::from_rows(rows, labels.to_vec()).unwrap()
}

pub fn rows_of(set: &LabeledSet) -> Rows {
    set.rows().map(<[f64]>::to_vec).collect()
}

pub fn unflatten(flat: &[f64], dim: usize) -> Rows {
    flat.chunks(dim).map(<[f64]>::to_vec).collect()
}

/// Bank rows in class-id order plus the ids.
pub fn bank_rows(bank: &CenterBank) -> (Vec<u32>, Rows) {
    let ids = bank.class_ids().to_vec();
    let rows = (0..bank.len()).map(|k| bank.row(k).to_vec()).collect();
    (ids, rows)
}

/// Labels valid for `kind`: exactly two per class for N-pair, 2..=4 per
/// class otherwise. At most 16 samples.
pub fn random_labels(rng: &mut impl Rng, kind: LossKind) -> Vec<u32> {
    let mut labels: Vec<u32> = if kind == LossKind::Npair {
        let classes = rng.random_range(2..=8u32);
        (0..classes).flat_map(|c| [c, c]).collect()
    } else {
        let classes = rng.random_range(2..=4u32);
        (0..classes)
            .flat_map(|c| std::iter::repeat_n(c, rng.random_range(2..=4)))
            .collect()
    };
    labels.shuffle(rng);
    labels
}

pub struct Case {
    pub rows: Rows,
    pub labels: Vec<u32>,
    pub bank: Option<CenterBank>,
}

impl Case {
    pub fn random(rng: &mut impl Rng, kind: LossKind, dim: usize) -> Case {
        let labels = random_labels(rng, kind);
        let rows = random_units(rng, labels.len(), dim);
        let bank = kind.uses_bank().then(|| {
            // One class beyond the batch so banks carry an unused row.
            let mut classes: Vec<u32> = labels.clone();
            classes.sort_unstable();
            classes.dedup();
            classes.push(classes.last().unwrap() + 1);
            CenterBank::random(dim, &classes, rng).unwrap()
        });
        Case { rows, labels, bank }
    }

    pub fn set(&self) -> LabeledSet {
        to_set(&self.rows, &self.labels)
    }

    pub fn eval(&self, kind: LossKind, cfg: &LossConfig) -> LossOutput {
        kind.evaluate(&self.set(), self.bank.as_ref(), cfg).unwrap()
    }
}
