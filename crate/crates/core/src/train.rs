//! Mini-batch training of a [`ProjectionHead`] under one of the losses.

use serde::{Deserialize, Serialize};

use crate::data::{sample_batches, BatchPlan};
use crate::diagnostics::{cosine_distance_stats, EpochRecord, Snapshot, TrainLog};
use crate::error::{Error, Result};
use crate::losses::{CenterBank, LossConfig, LossKind};
use crate::math::LabeledSet;
use crate::model::{AdamConfig, AdamState, HeadDims, Mode, ParamGrad, ProjectionHead};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub loss: LossKind,
    pub loss_config: LossConfig,
    pub optimizer: AdamConfig,
    pub plan: BatchPlan,
    pub seed: u64,
}

/// Owns the head, its optimizer state, and the loss's center bank.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub head: ProjectionHead,
    pub adam: AdamState,
    pub bank: Option<CenterBank>,
    bank_adam: Option<AdamState>,
    settings: TrainSettings,
}

impl Trainer {
    pub fn new(settings: TrainSettings, dims: HeadDims, dropout_rate: f64, classes: &[u32]) -> Result<Self> {
        settings.loss_config.validate()?;
        settings.optimizer.validate()?;
        settings.plan.validate()?;
        let head = ProjectionHead::new(dims, dropout_rate, settings.seed)?;
        let adam = AdamState::new(settings.optimizer, &dims.shapes());
        let (bank, bank_adam) = if settings.loss.uses_bank() {
            let mut rng = seeded_rng(settings.seed, 0x4241_4e4b);
            let bank = CenterBank::random(dims.d_out, classes, &mut rng)?;
            let state = AdamState::new(settings.optimizer, &[bank.values().len()]);
            (Some(bank), Some(state))
        } else {
            (None, None)
        };
        Ok(Trainer {
            head,
            adam,
            bank,
            bank_adam,
            settings,
        })
    }

    pub fn settings(&self) -> &TrainSettings {
        &self.settings
    }

    /// One pass over `train`; returns per-epoch means over batches.
    pub fn run_epoch(&mut self, train: &LabeledSet, epoch: usize) -> Result<EpochRecord> {
        let TrainSettings {
            loss,
            loss_config,
            plan,
            seed,
            ..
        } = self.settings;
        let (mut loss_sum, mut active_sum, mut norm_sum) = (0.0, 0.0, 0.0);
        let mut batches = 0usize;

        for (b, batch) in sample_batches(train, &plan, epoch as u64)?.enumerate() {
            let batch = batch?;
            let dropout_seed = seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(((epoch as u64) << 32) | b as u64);
            let (embeddings, cache) = self.head.forward(&batch, Mode::Training, dropout_seed)?;
            let out = loss.evaluate(&embeddings, self.bank.as_ref(), &loss_config)?;
            if !out.value.is_finite() {
                return Err(Error::Numeric(format!(
                    "{loss} produced a non-finite loss at epoch {epoch}, batch {b}"
                )));
            }
            let mut grads = self.head.backward(&cache, &out.grad_embeddings)?;
            if let Some(bank_grad) = &out.grad_params {
                grads.push(ParamGrad::new("centers", bank_grad.clone()));
            }
            if !grads.global_norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, batch {b}"
                )));
            }

            self.head.apply_adam(&mut self.adam, &grads)?;
            if let (Some(bank), Some(state), Some(g)) =
                (self.bank.as_mut(), self.bank_adam.as_mut(), out.grad_params.as_deref())
            {
                state.step(&mut [bank.values_mut()], &[g])?;
                bank.renormalize()?;
            }

            loss_sum += out.value;
            active_sum += out.active_ratio();
            norm_sum += grads.global_norm;
            batches += 1;
        }

        if batches == 0 {
            return Err(Error::EmptyLoss("epoch produced no batches".into()));
        }
        let inv = 1.0 / batches as f64;
        Ok(EpochRecord {
            epoch,
            loss: loss_sum * inv,
            active_ratio: active_sum * inv,
            grad_norm: norm_sum * inv,
        })
    }

    /// Inference-mode embeddings of `features`.
    pub fn embed(&self, features: &LabeledSet) -> Result<LabeledSet> {
        self.head.embed(features)
    }

    /// Trains for `epochs`, recording a variance snapshot of `eval` before
    /// training and after every `snapshot_interval` epochs (and the last).
    pub fn fit(
        &mut self,
        train: &LabeledSet,
        eval: &LabeledSet,
        epochs: usize,
        snapshot_interval: usize,
        log: &mut TrainLog,
    ) -> Result<()> {
        log.snapshots.push(Snapshot {
            epoch: 0,
            report: cosine_distance_stats(&self.embed(eval)?)?,
        });
        for epoch in 0..epochs {
            let record = self.run_epoch(train, epoch)?;
            log.push(record)?;
            let done = epoch + 1;
            if (snapshot_interval > 0 && done % snapshot_interval == 0) || done == epochs {
                log.snapshots.push(Snapshot {
                    epoch: done,
                    report: cosine_distance_stats(&self.embed(eval)?)?,
                });
            }
        }
        Ok(())
    }
}
