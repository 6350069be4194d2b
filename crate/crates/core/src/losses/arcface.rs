use super::{softmax, CenterBank, GradRows, LossConfig, LossOutput};
use crate::error::Result;
use crate::math::{dot, LabeledSet};

/// Additive angular margin loss.
///
/// Class logits are `s·cos θ_c` with `cos θ_c = z·w_c`; the target logit is
/// replaced by `s·cos(θ_y + m_a)` and the loss is softmax cross-entropy over
/// every class in the bank. A sample is active when its margin-augmented
/// target logit is not strictly the largest.
pub fn arcface_loss(batch: &LabeledSet, bank: &CenterBank, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    let dim = batch.dim();
    if bank.dim() != dim {
        return Err(crate::error::Error::Shape {
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
    let scale = cfg.arcface_scale;
    let (cos_m, sin_m) = (cfg.arcface_margin.cos(), cfg.arcface_margin.sin());

    let mut grad = GradRows::zeros(n, dim);
    let mut grad_bank = GradRows::zeros(classes, dim);
    let mut units = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    let mut logits = vec![0.0; classes];

    for (i, &y) in targets.iter().enumerate() {
        let z = batch.row(i);
        for (c, l) in logits.iter_mut().enumerate() {
            *l = scale * dot(z, bank.row(c));
        }
        let cos_y = logits[y] / scale;
        let sin_y = (1.0 - cos_y * cos_y).max(0.0).sqrt();
        // cos(θ + m) = cos θ cos m − sin θ sin m
        let margin_cos = cos_y * cos_m - sin_y * sin_m;
        let d_margin = if sin_y > 1e-12 {
            cos_m + sin_m * cos_y / sin_y
        } else {
            cos_m
        };
        logits[y] = scale * margin_cos;

        let target = logits[y];
        flags.push(logits.iter().enumerate().any(|(c, &l)| c != y && l >= target));

        let (lse, probs) = softmax(&logits);
        units.push(lse - target);

        for (c, &p) in probs.iter().enumerate() {
            let coef = if c == y {
                (p - 1.0) * scale * d_margin
            } else {
                p * scale
            };
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn axis_bank() -> CenterBank {
        CenterBank::new(
            3,
            [
                (0, vec![1.0, 0.0, 0.0]),
                (1, vec![0.0, 1.0, 0.0]),
                (2, vec![0.0, 0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn sample_on_its_weight_is_inactive() {
        let set = LabeledSet::from_rows(&[vec![1.0, 0.0, 0.0]], vec![0]).unwrap();
        let out = arcface_loss(&set, &axis_bank(), &LossConfig::default()).unwrap();
        assert_eq!(out.active_flags, vec![false]);
    }

    #[test]
    fn zero_margin_is_plain_cross_entropy() {
        let cfg = LossConfig {
            arcface_margin: 0.0,
            ..LossConfig::default()
        };
        let z = vec![0.6, 0.8, 0.0];
        let set = LabeledSet::from_rows(std::slice::from_ref(&z), vec![1]).unwrap();
        let out = arcface_loss(&set, &axis_bank(), &cfg).unwrap();
        let logits: Vec<f64> = z.iter().map(|c| cfg.arcface_scale * c).collect();
        let max = logits.iter().copied().fold(f64::MIN, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        assert!((out.value - (lse - logits[1])).abs() < 1e-12);
    }

    #[test]
    fn missing_class_weight() {
        let set = LabeledSet::from_rows(&[vec![1.0, 0.0, 0.0]], vec![9]).unwrap();
        assert!(matches!(
            arcface_loss(&set, &axis_bank(), &LossConfig::default()),
            Err(Error::UnknownClass(9))
        ));
    }
}
