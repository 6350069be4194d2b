use std::collections::BTreeMap;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::LabeledSet;
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchStrategy {
    /// `P` classes × `K` samples.
    PkBalanced,
    /// `P` classes × exactly 2 samples, for N-pair.
    NpairPairs,
    /// Uniform shuffle, no class structure.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchPlan {
    pub strategy: BatchStrategy,
    pub classes_per_batch: usize,
    pub samples_per_class: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchPlan {
    pub fn pk(classes: usize, per_class: usize, seed: u64) -> Self {
        BatchPlan {
            strategy: BatchStrategy::PkBalanced,
            classes_per_batch: classes,
            samples_per_class: per_class,
            batch_size: classes * per_class,
            seed,
        }
    }

    pub fn npair(classes: usize, seed: u64) -> Self {
        BatchPlan {
            strategy: BatchStrategy::NpairPairs,
            classes_per_batch: classes,
            samples_per_class: 2,
            batch_size: 2 * classes,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.strategy {
            BatchStrategy::PkBalanced => {
                self.samples_per_class >= 2
                    && self.classes_per_batch >= 1
                    && self.classes_per_batch * self.samples_per_class == self.batch_size
            }
            BatchStrategy::NpairPairs => {
                self.samples_per_class == 2
                    && self.classes_per_batch >= 2
                    && self.batch_size == 2 * self.classes_per_batch
            }
            BatchStrategy::Random => self.batch_size >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("inconsistent batch plan {self:?}")))
        }
    }
}

/// Row indices of every batch in one epoch.
///
/// Class-structured strategies shuffle each class, cut it into chunks of
/// `K`, and deal chunks of distinct classes into batches until every chunk
/// is used, so each sample appears at least once per epoch. A final batch
/// short of `P` classes is topped up with fresh chunks from unused classes.
pub fn plan_epoch(labels: &[u32], plan: &BatchPlan, epoch: u64) -> Result<Vec<Vec<usize>>> {
    plan.validate()?;
    let mut rng = seeded_rng(plan.seed ^ 0x5341_4d50_4c45_5253, epoch);

    if plan.strategy == BatchStrategy::Random {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        return Ok(order.chunks(plan.batch_size).map(<[usize]>::to_vec).collect());
    }

    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        members.entry(y).or_default().push(i);
    }
    let p = plan.classes_per_batch;
    let k = plan.samples_per_class;
    if members.len() < p {
        return Err(Error::Parameter(format!(
            "plan draws {p} classes per batch but the dataset has {}",
            members.len()
        )));
    }
    let small: Vec<u32> = members.iter().filter(|(_, m)| m.len() < k).map(|(&c, _)| c).collect();
    if !small.is_empty() {
        warn!("classes {small:?} have fewer than {k} samples; sampling them with replacement");
    }

    let mut chunks: Vec<(u32, Vec<usize>)> = Vec::new();
    for (&class, idx) in &members {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        for chunk in shuffled.chunks(k) {
            let mut chunk = chunk.to_vec();
            while chunk.len() < k {
                chunk.push(*idx.choose(&mut rng).expect("class has members"));
            }
            chunks.push((class, chunk));
        }
    }
    chunks.shuffle(&mut rng);

    let mut batches = Vec::new();
    while !chunks.is_empty() {
        let mut used: Vec<u32> = Vec::with_capacity(p);
        let mut batch = Vec::with_capacity(p * k);
        let mut i = 0;
        while i < chunks.len() && used.len() < p {
            if used.contains(&chunks[i].0) {
                i += 1;
            } else {
                let (class, chunk) = chunks.remove(i);
                used.push(class);
                batch.extend(chunk);
            }
        }
        if used.len() < p {
            let mut spare: Vec<u32> = members.keys().copied().filter(|c| !used.contains(c)).collect();
            spare.shuffle(&mut rng);
            for class in spare.into_iter().take(p - used.len()) {
                batch.extend(draw(&members[&class], k, &mut rng));
            }
        }
        batches.push(batch);
    }
    Ok(batches)
}

/// `k` members without replacement when possible.
fn draw<R: Rng>(idx: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    if idx.len() >= k {
        idx.choose_multiple(rng, k).copied().collect()
    } else {
        (0..k).map(|_| *idx.choose(rng).expect("class has members")).collect()
    }
}

/// Materialized batches for one epoch, deterministic in `(plan.seed, epoch)`.
pub fn sample_batches<'a>(
    set: &'a LabeledSet,
    plan: &BatchPlan,
    epoch: u64,
) -> Result<impl Iterator<Item = Result<LabeledSet>> + 'a> {
    let batches = plan_epoch(set.labels(), plan, epoch)?;
    Ok(batches.into_iter().map(move |idx| set.select(&idx)))
}
