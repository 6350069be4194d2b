use super::{GradRows, LossConfig, LossOutput};
use crate::error::{Error, Result};
use crate::math::{euclidean_distance, LabeledSet};

/// Pairwise contrastive loss over every unordered pair in the batch.
///
/// Same-class pairs contribute `d²`, cross-class pairs `max(0, m − d)²`,
/// with `d` the Euclidean distance. A pair is active when its term is
/// positive.
pub fn contrastive_loss(batch: &LabeledSet, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::InsufficientPairs);
    }
    let dim = batch.dim();
    let pairs = n * (n - 1) / 2;
    let mut grad = GradRows::zeros(n, dim);
    let mut flags = Vec::with_capacity(pairs);
    let mut units = Vec::with_capacity(pairs);
    let mut total = 0.0;
    let mut diff = vec![0.0; dim];

    for i in 0..n {
        for j in (i + 1)..n {
            let (zi, zj) = (batch.row(i), batch.row(j));
            let d = euclidean_distance(zi, zj)?;
            for ((o, a), b) in diff.iter_mut().zip(zi).zip(zj) {
                *o = a - b;
            }
            if batch.label(i) == batch.label(j) {
                let term = d * d;
                total += term;
                units.push(term);
                flags.push(term > 0.0);
                // ∂d²/∂z_i = 2 (z_i − z_j)
                grad.axpy(i, 2.0, &diff);
                grad.axpy(j, -2.0, &diff);
            } else {
                let gap = cfg.margin - d;
                if gap > 0.0 {
                    total += gap * gap;
                    units.push(gap * gap);
                    flags.push(true);
                    if d > 0.0 {
                        let coef = -2.0 * gap / d;
                        grad.axpy(i, coef, &diff);
                        grad.axpy(j, -coef, &diff);
                    }
                } else {
                    units.push(0.0);
                    flags.push(false);
                }
            }
        }
    }

    let inv = 1.0 / pairs as f64;
    grad.scale(inv);
    Ok(LossOutput {
        value: total * inv,
        active_flags: flags,
        unit_losses: units,
        grad_embeddings: grad.data,
        grad_params: None,
        unit_count: pairs,
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: Vec<f64>, b: Vec<f64>, same: bool) -> LabeledSet {
        LabeledSet::from_rows(&[a, b], vec![0, if same { 0 } else { 1 }]).unwrap()
    }

    #[test]
    fn coincident_positive_pair_is_inactive() {
        let out = contrastive_loss(&pair(vec![1.0, 0.0], vec![1.0, 0.0], true), &LossConfig::default()).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.active_flags, vec![false]);
    }

    #[test]
    fn negative_pair_beyond_margin_is_inactive() {
        let out = contrastive_loss(&pair(vec![0.0, 0.0], vec![1.5, 0.0], false), &LossConfig::default()).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.active_flags, vec![false]);
        assert!(out.grad_embeddings.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn negative_pair_inside_margin() {
        let out = contrastive_loss(&pair(vec![0.0, 0.0], vec![0.5, 0.0], false), &LossConfig::default()).unwrap();
        assert!((out.value - 0.25).abs() < 1e-15);
        assert_eq!(out.active_flags, vec![true]);
    }

    #[test]
    fn single_sample_is_an_error() {
        let set = LabeledSet::from_rows(&[vec![1.0, 0.0]], vec![0]).unwrap();
        assert!(matches!(
            contrastive_loss(&set, &LossConfig::default()),
            Err(Error::InsufficientPairs)
        ));
    }
}
