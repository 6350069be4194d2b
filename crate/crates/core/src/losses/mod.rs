//! Supervised embedding losses with analytic gradients.
//!
//! Every loss consumes a [`LabeledSet`] of unit-norm embeddings and returns a
//! [`LossOutput`] carrying the mean loss, one active flag per loss unit
//! (pair, anchor or sample), and the gradient of the mean loss with respect
//! to every input embedding. ArcFace and CCL also own per-class vectors held
//! in a [`CenterBank`] and report gradients for them in
//! [`LossOutput::grad_params`].
//!
//! Embeddings are not re-checked for unit norm here: the head produces them
//! normalized, and finite-difference checks need to step off the sphere.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_unit, l2_normalize, LabeledSet};

mod arcface;
mod ccl;
mod contrastive;
mod infonce;
mod npair;
mod scl;
mod triplet;

pub use arcface::arcface_loss;
pub use ccl::ccl_loss;
pub use contrastive::contrastive_loss;
pub use infonce::infonce_loss;
pub use npair::npair_loss;
pub use scl::scl_loss;
pub use triplet::triplet_loss_batch_hard;

/// Hyperparameters shared by the seven losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Euclidean margin for contrastive and triplet losses.
    pub margin: f64,
    /// Softmax temperature for InfoNCE, SCL and CCL.
    pub temperature: f64,
    /// Weight of CCL's pull toward the own-class center.
    pub center_weight: f64,
    /// ArcFace additive angular margin, radians.
    pub arcface_margin: f64,
    /// ArcFace logit scale.
    pub arcface_scale: f64,
    /// Softmax-family losses count a unit as active above this value.
    pub active_epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 1.0,
            temperature: 0.07,
            center_weight: 10.0,
            arcface_margin: 0.5,
            arcface_scale: 64.0,
            active_epsilon: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.temperature > 0.0, "temperature must be positive"),
            (self.arcface_scale > 0.0, "arcface scale must be positive"),
            (self.center_weight >= 0.0, "center weight must be non-negative"),
            (self.margin >= 0.0, "margin must be non-negative"),
            (
                (0.0..std::f64::consts::FRAC_PI_2).contains(&self.arcface_margin),
                "arcface margin must lie in [0, π/2)",
            ),
            (self.active_epsilon > 0.0, "active epsilon must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Parameter(msg.into()));
            }
        }
        Ok(())
    }
}

/// Result of evaluating a loss on one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// Mean loss over units.
    pub value: f64,
    /// One flag per unit; true when the unit still contributes loss.
    pub active_flags: Vec<bool>,
    /// Loss of each unit before averaging.
    pub unit_losses: Vec<f64>,
    /// Row-major gradient, one row per input embedding.
    pub grad_embeddings: Vec<f64>,
    /// Gradient for the center bank rows, same layout as the bank.
    pub grad_params: Option<Vec<f64>>,
    pub unit_count: usize,
    pub dim: usize,
}

impl LossOutput {
    pub fn grad_row(&self, i: usize) -> &[f64] {
        &self.grad_embeddings[i * self.dim..(i + 1) * self.dim]
    }

    pub fn active_ratio(&self) -> f64 {
        active_ratio(self)
    }
}

/// Fraction of units whose active flag is set.
pub fn active_ratio(out: &LossOutput) -> f64 {
    if out.unit_count == 0 {
        return 0.0;
    }
    out.active_flags.iter().filter(|&&a| a).count() as f64 / out.unit_count as f64
}

/// Per-class unit vectors: CCL centers, ArcFace class weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterBank {
    dim: usize,
    ids: Vec<u32>,
    index: BTreeMap<u32, usize>,
    values: Vec<f64>,
}

impl CenterBank {
    /// Builds a bank from `(class, vector)` pairs. Vectors must be unit-norm.
    pub fn new(dim: usize, centers: impl IntoIterator<Item = (u32, Vec<f64>)>) -> Result<Self> {
        let mut sorted: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (id, v) in centers {
            if v.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if !is_unit(&v) {
                return Err(Error::Precondition(format!("center for class {id} is not unit-norm")));
            }
            sorted.insert(id, v);
        }
        if sorted.is_empty() {
            return Err(Error::Parameter("center bank needs at least one class".into()));
        }
        let ids: Vec<u32> = sorted.keys().copied().collect();
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let values = sorted.into_values().flatten().collect();
        Ok(CenterBank {
            dim,
            ids,
            index,
            values,
        })
    }

    /// Random unit centers for the given classes.
    pub fn random<R: Rng>(dim: usize, classes: &[u32], rng: &mut R) -> Result<Self> {
        let centers = classes
            .iter()
            .map(|&c| {
                let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                l2_normalize(&raw).map(|v| (c, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, centers)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn position(&self, class: u32) -> Result<usize> {
        self.index.get(&class).copied().ok_or(Error::UnknownClass(class))
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get(&self, class: u32) -> Option<&[f64]> {
        self.index.get(&class).map(|&k| self.row(k))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Rescales every center back to unit length after an optimizer step.
    pub fn renormalize(&mut self) -> Result<()> {
        for (k, row) in self.values.chunks_exact_mut(self.dim).enumerate() {
            let unit = l2_normalize(row)
                .map_err(|_| Error::Degenerate(format!("center {} collapsed to zero", self.ids[k])))?;
            row.copy_from_slice(&unit);
        }
        Ok(())
    }
}

/// The seven supported objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Contrastive,
    Triplet,
    Npair,
    Infonce,
    Arcface,
    Scl,
    Ccl,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Contrastive,
        LossKind::Triplet,
        LossKind::Npair,
        LossKind::Infonce,
        LossKind::Arcface,
        LossKind::Scl,
        LossKind::Ccl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Contrastive => "contrastive",
            LossKind::Triplet => "triplet",
            LossKind::Npair => "npair",
            LossKind::Infonce => "infonce",
            LossKind::Arcface => "arcface",
            LossKind::Scl => "scl",
            LossKind::Ccl => "ccl",
        }
    }

    /// Whether the loss owns a [`CenterBank`].
    pub fn uses_bank(self) -> bool {
        matches!(self, LossKind::Arcface | LossKind::Ccl)
    }

    pub fn evaluate(self, batch: &LabeledSet, bank: Option<&CenterBank>, cfg: &LossConfig) -> Result<LossOutput> {
        let need_bank = || bank.ok_or_else(|| Error::Contract(format!("{} requires a center bank", self.name())));
        match self {
            LossKind::Contrastive => contrastive_loss(batch, cfg),
            LossKind::Triplet => triplet_loss_batch_hard(batch, cfg),
            LossKind::Npair => npair_loss(batch, cfg),
            LossKind::Infonce => infonce_loss(batch, cfg),
            LossKind::Arcface => arcface_loss(batch, need_bank()?, cfg),
            LossKind::Scl => scl_loss(batch, cfg),
            LossKind::Ccl => ccl_loss(batch, need_bank()?, cfg),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parameter(format!("unknown loss {s:?}")))
    }
}

/// Row-major gradient accumulator.
pub(crate) struct GradRows {
    dim: usize,
    pub(crate) data: Vec<f64>,
}

impl GradRows {
    pub(crate) fn zeros(rows: usize, dim: usize) -> Self {
        GradRows {
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// `row[i] += alpha * v`
    pub(crate) fn axpy(&mut self, i: usize, alpha: f64, v: &[f64]) {
        let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
        for (r, x) in row.iter_mut().zip(v) {
            *r += alpha * x;
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

/// Numerically stable log-sum-exp and the matching softmax weights.
pub(crate) fn softmax(logits: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let lse = max + sum.ln();
    (lse, exps.into_iter().map(|e| e / sum).collect())
}
