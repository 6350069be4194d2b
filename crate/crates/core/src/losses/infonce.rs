use log::warn;

use super::{softmax, GradRows, LossConfig, LossOutput};
use crate::error::{Error, Result};
use crate::math::{dot, LabeledSet};

/// Supervised InfoNCE with a single positive per anchor.
///
/// The positive is the most similar same-class sample (lowest index on
/// ties); every other batch member is a candidate in the denominator:
/// `−log(exp(s_ip/τ) / Σ_{k≠i} exp(s_ik/τ))`.
pub fn infonce_loss(batch: &LabeledSet, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    let dim = batch.dim();
    let sims = similarity_matrix(batch);
    let inv_tau = 1.0 / cfg.temperature;

    let mut grad = GradRows::zeros(n, dim);
    let mut units = Vec::with_capacity(n);
    let mut skipped = 0usize;
    let mut logits = Vec::with_capacity(n);
    let mut anchors = Vec::with_capacity(n);

    for i in 0..n {
        let positive =
            (0..n)
                .filter(|&j| j != i && batch.label(j) == batch.label(i))
                .fold(None, |best: Option<usize>, j| match best {
                    Some(b) if sims[i * n + b] >= sims[i * n + j] => Some(b),
                    _ => Some(j),
                });
        let Some(p) = positive else {
            skipped += 1;
            continue;
        };
        logits.clear();
        logits.extend((0..n).filter(|&k| k != i).map(|k| sims[i * n + k] * inv_tau));
        let (lse, probs) = softmax(&logits);
        units.push(lse - sims[i * n + p] * inv_tau);
        anchors.push((i, p, probs));
    }

    if skipped > 0 {
        warn!("infonce: skipped {skipped} anchor(s) without a positive");
    }
    if units.is_empty() {
        return Err(Error::EmptyLoss("no anchor has a positive".into()));
    }

    for (i, p, probs) in anchors {
        let zi = batch.row(i).to_vec();
        for (k, q) in (0..n).filter(|&k| k != i).zip(probs) {
            grad.axpy(i, q * inv_tau, batch.row(k));
            grad.axpy(k, q * inv_tau, &zi);
        }
        grad.axpy(i, -inv_tau, batch.row(p));
        grad.axpy(p, -inv_tau, &zi);
    }

    let count = units.len();
    let inv = 1.0 / count as f64;
    grad.scale(inv);
    Ok(LossOutput {
        value: units.iter().sum::<f64>() * inv,
        active_flags: units.iter().map(|&l| l > cfg.active_epsilon).collect(),
        unit_losses: units,
        grad_embeddings: grad.data,
        grad_params: None,
        unit_count: count,
        dim,
    })
}

pub(crate) fn similarity_matrix(batch: &LabeledSet) -> Vec<f64> {
    let n = batch.len();
    let mut sims = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s = dot(batch.row(i), batch.row(j));
            sims[i * n + j] = s;
            sims[j * n + i] = s;
        }
    }
    sims
}
