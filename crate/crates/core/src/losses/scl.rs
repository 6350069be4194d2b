use super::infonce::similarity_matrix;
use super::{softmax, GradRows, LossConfig, LossOutput};
use crate::error::{Error, Result};
use crate::math::LabeledSet;

/// Supervised contrastive loss averaging over all same-class positives:
/// `−(1/|P(i)|) Σ_{p∈P(i)} log(exp(z_i·z_p/τ) / Σ_{a≠i} exp(z_i·z_a/τ))`.
pub fn scl_loss(batch: &LabeledSet, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    let dim = batch.dim();
    let sims = similarity_matrix(batch);
    let inv_tau = 1.0 / cfg.temperature;

    let mut grad = GradRows::zeros(n, dim);
    let mut units = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);

    for i in 0..n {
        let positives: Vec<usize> = (0..n).filter(|&j| j != i && batch.label(j) == batch.label(i)).collect();
        if positives.is_empty() {
            continue;
        }
        logits.clear();
        logits.extend((0..n).filter(|&k| k != i).map(|k| sims[i * n + k] * inv_tau));
        let (lse, probs) = softmax(&logits);
        let inv_pos = 1.0 / positives.len() as f64;
        let mean_pos = positives.iter().map(|&p| sims[i * n + p]).sum::<f64>() * inv_pos;
        units.push(lse - mean_pos * inv_tau);

        let zi = batch.row(i).to_vec();
        for (k, q) in (0..n).filter(|&k| k != i).zip(probs) {
            grad.axpy(i, q * inv_tau, batch.row(k));
            grad.axpy(k, q * inv_tau, &zi);
        }
        for &p in &positives {
            grad.axpy(i, -inv_tau * inv_pos, batch.row(p));
            grad.axpy(p, -inv_tau * inv_pos, &zi);
        }
    }

    if units.is_empty() {
        return Err(Error::EmptyLoss("no anchor has a positive".into()));
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
