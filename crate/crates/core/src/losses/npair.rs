use super::{softmax, GradRows, LossConfig, LossOutput};
use crate::error::{Error, Result};
use crate::math::{dot, LabeledSet};

/// Multi-class N-pair loss.
///
/// The batch must hold exactly two samples per class; the first occurrence
/// is the anchor `a_k` and the second the positive `p_k`. Each anchor
/// contributes `log(1 + Σ_{j≠k} exp(a_k·p_j − a_k·p_k))`.
pub fn npair_loss(batch: &LabeledSet, cfg: &LossConfig) -> Result<LossOutput> {
    let dim = batch.dim();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (class, members) in batch.class_members() {
        if members.len() != 2 {
            return Err(Error::BatchStructure(format!(
                "n-pair needs exactly 2 samples of class {class}, found {}",
                members.len()
            )));
        }
        pairs.push((members[0], members[1]));
    }
    // Anchor order follows first appearance in the batch.
    pairs.sort_unstable();
    let classes = pairs.len();
    if classes < 2 {
        return Err(Error::BatchStructure("n-pair needs at least 2 classes".into()));
    }

    let mut grad = GradRows::zeros(batch.len(), dim);
    let mut units = Vec::with_capacity(classes);
    let mut logits = vec![0.0; classes];

    for (k, &(a, p)) in pairs.iter().enumerate() {
        let anchor = batch.row(a);
        let pos_sim = dot(anchor, batch.row(p));
        // Slot k stands for the constant 1 inside the log.
        for (j, &(_, pj)) in pairs.iter().enumerate() {
            logits[j] = if j == k {
                0.0
            } else {
                dot(anchor, batch.row(pj)) - pos_sim
            };
        }
        let (lse, probs) = softmax(&logits);
        units.push(lse);

        let mut pushed = 0.0;
        for (j, &(_, pj)) in pairs.iter().enumerate() {
            if j == k {
                continue;
            }
            let q = probs[j];
            pushed += q;
            grad.axpy(a, q, batch.row(pj));
            grad.axpy(pj, q, anchor);
        }
        grad.axpy(a, -pushed, batch.row(p));
        grad.axpy(p, -pushed, anchor);
    }

    let inv = 1.0 / classes as f64;
    grad.scale(inv);
    Ok(LossOutput {
        value: units.iter().sum::<f64>() * inv,
        active_flags: units.iter().map(|&l| l > cfg.active_epsilon).collect(),
        unit_losses: units,
        grad_embeddings: grad.data,
        grad_params: None,
        unit_count: classes,
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_dots_give_log_n() {
        // Every anchor/positive dot is zero, so every exponent is zero.
        let rows = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
        ];
        // anchors rows 0,2,4 and positives rows 1,3,5: a_i·p_j = 0 everywhere.
        let set = LabeledSet::from_rows(&rows, vec![0, 0, 1, 1, 2, 2]).unwrap();
        let out = npair_loss(&set, &LossConfig::default()).unwrap();
        for l in &out.unit_losses {
            assert!((l - 3f64.ln()).abs() < 1e-12);
        }
        assert!(out.active_flags.iter().all(|&f| f));
    }

    #[test]
    fn dominant_positive_is_inactive() {
        let s = 40.0;
        let rows = vec![vec![s, 0.0], vec![s, 0.0], vec![-s, 0.0], vec![-s, 0.0]];
        let set = LabeledSet::from_rows(&rows, vec![0, 0, 1, 1]).unwrap();
        let out = npair_loss(&set, &LossConfig::default()).unwrap();
        assert!(out.value < 1e-12);
        assert!(out.active_flags.iter().all(|&f| !f));
    }

    #[test]
    fn rejects_wrong_class_sizes() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8], vec![0.8, 0.6]];
        let set = LabeledSet::from_rows(&rows, vec![0, 0, 0, 1]).unwrap();
        assert!(matches!(
            npair_loss(&set, &LossConfig::default()),
            Err(Error::BatchStructure(_))
        ));
    }
}
