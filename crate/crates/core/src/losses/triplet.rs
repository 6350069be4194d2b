use log::warn;

use super::{GradRows, LossConfig, LossOutput};
use crate::error::{Error, Result};
use crate::math::{euclidean_distance, LabeledSet};

/// Batch-hard triplet loss.
///
/// For each anchor the farthest same-class sample `p*` and the nearest
/// other-class sample `n*` are mined from the batch, giving
/// `max(0, d(a, p*) − d(a, n*) + m)` with Euclidean `d`. Anchors whose class
/// has no other member are skipped. Ties in mining resolve to the lowest
/// index.
pub fn triplet_loss_batch_hard(batch: &LabeledSet, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    let dim = batch.dim();
    if batch.classes().len() < 2 {
        return Err(Error::NoNegatives);
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean_distance(batch.row(i), batch.row(j))?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut grad = GradRows::zeros(n, dim);
    let mut flags = Vec::with_capacity(n);
    let mut units = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut skipped = 0usize;
    let mut active = Vec::new();

    for a in 0..n {
        let ya = batch.label(a);
        let mut hardest_pos: Option<(usize, f64)> = None;
        let mut hardest_neg: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| j != a) {
            let d = dist[a * n + j];
            if batch.label(j) == ya {
                if hardest_pos.is_none_or(|(_, best)| d > best) {
                    hardest_pos = Some((j, d));
                }
            } else if hardest_neg.is_none_or(|(_, best)| d < best) {
                hardest_neg = Some((j, d));
            }
        }
        let (Some((p, d_ap)), Some((q, d_an))) = (hardest_pos, hardest_neg) else {
            skipped += 1;
            continue;
        };
        let term = d_ap - d_an + cfg.margin;
        let is_active = term > 0.0;
        flags.push(is_active);
        units.push(term.max(0.0));
        if is_active {
            total += term;
            active.push((a, p, d_ap, q, d_an));
        }
    }

    if skipped > 0 {
        warn!("triplet: skipped {skipped} anchor(s) whose class has a single member");
    }
    if flags.is_empty() {
        return Err(Error::EmptyLoss("no anchor has a positive".into()));
    }

    let mut diff = vec![0.0; dim];
    for (a, p, d_ap, q, d_an) in active {
        if d_ap > 0.0 {
            sub(batch.row(a), batch.row(p), &mut diff);
            grad.axpy(a, 1.0 / d_ap, &diff);
            grad.axpy(p, -1.0 / d_ap, &diff);
        }
        if d_an > 0.0 {
            sub(batch.row(a), batch.row(q), &mut diff);
            grad.axpy(a, -1.0 / d_an, &diff);
            grad.axpy(q, 1.0 / d_an, &diff);
        }
    }

    let count = flags.len();
    let inv = 1.0 / count as f64;
    grad.scale(inv);
    Ok(LossOutput {
        value: total * inv,
        active_flags: flags,
        unit_losses: units,
        grad_embeddings: grad.data,
        grad_params: None,
        unit_count: count,
        dim,
    })
}

fn sub(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x - y;
    }
}
