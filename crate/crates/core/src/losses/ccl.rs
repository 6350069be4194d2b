use super::{softmax, CenterBank, GradRows, LossConfig, LossOutput};
use crate::error::{Error, Result};
use crate::math::{dot, LabeledSet};

/// Center contrastive loss.
///
/// Each sample pays a softmax over its similarities to all class centers,
/// `−log(exp(z·μ_y/τ) / Σ_c exp(z·μ_c/τ))`, plus `λ_c · (1 − z·μ_y)`
/// pulling it toward its own center. A sample is active when some other
/// center is strictly closer in cosine distance than its own.
pub fn ccl_loss(batch: &LabeledSet, bank: &CenterBank, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    let dim = batch.dim();
    if bank.dim() != dim {
        return Err(Error::Shape {
            expected: dim,
            actual: bank.dim(),
        });
    }
    let targets = batch
        .labels()
        .iter()
        .map(|&y| bank.position(y))
        .collect::<Result<Vec<_>>>()?;

    let classes = bank.len();
    let inv_tau = 1.0 / cfg.temperature;
    let lambda = cfg.center_weight;

    let mut grad = GradRows::zeros(n, dim);
    let mut grad_bank = GradRows::zeros(classes, dim);
    let mut units = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    let mut sims = vec![0.0; classes];

    for (i, &y) in targets.iter().enumerate() {
        let z = batch.row(i);
        for (c, s) in sims.iter_mut().enumerate() {
            *s = dot(z, bank.row(c));
        }
        // d_cos(z, μ_y) > min_{c≠y} d_cos(z, μ_c)  ⇔  s_y < max_{c≠y} s_c
        let own = 1.0 - sims[y];
        flags.push(sims.iter().enumerate().any(|(c, &s)| c != y && own > 1.0 - s));

        let logits: Vec<f64> = sims.iter().map(|s| s * inv_tau).collect();
        let (lse, probs) = softmax(&logits);
        units.push(lse - logits[y] + lambda * own);

        for (c, &p) in probs.iter().enumerate() {
            let mut coef = p * inv_tau;
            if c == y {
                coef -= inv_tau + lambda;
            }
            grad.axpy(i, coef, bank.row(c));
            grad_bank.axpy(c, coef, z);
        }
    }

    let inv = 1.0 / n as f64;
    grad.scale(inv);
    grad_bank.scale(inv);
    Ok(LossOutput {
        value: units.iter().sum::<f64>() * inv,
        active_flags: flags,
        unit_losses: units,
        grad_embeddings: grad.data,
        grad_params: Some(grad_bank.data),
        unit_count: n,
        dim,
    })
}
