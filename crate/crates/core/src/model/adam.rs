use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Parameter("lr and weight decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Parameter("betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Parameter("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Adam moments for a fixed list of parameter tensors, with decoupled
/// weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    /// Zero-initialized moments mirroring `shapes` (element counts).
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        AdamState {
            config,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.first_moment.iter().map(Vec::len).collect()
    }

    /// One update: `θ ← θ − lr·wd·θ`, then the bias-corrected Adam delta.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Contract(format!(
                    "tensor of {} elements paired with gradient of {} (state {})",
                    p.len(),
                    g.len(),
                    m.len()
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let decay = lr * weight_decay;

        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[k];
            let v = &mut self.second_moment[k];
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= decay * p[j];
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, wd: f64) -> AdamConfig {
        AdamConfig {
            lr,
            weight_decay: wd,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut state = AdamState::new(cfg(1e-3, 0.0), &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        state.step(&mut [&mut p], &[&[0.0; 3]]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let c = cfg(1e-2, 0.0);
        let mut state = AdamState::new(c, &[1]);
        let g = 0.37;
        let mut p = vec![2.0];
        state.step(&mut [&mut p], &[&[g]]).unwrap();
        // t = 1: m̂ = g, v̂ = g², delta = −lr·g/(|g| + eps)
        let expected = 2.0 - c.lr * g / (g.abs() + c.eps);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn two_steps_constant_gradient() {
        let c = cfg(1e-2, 0.0);
        let mut state = AdamState::new(c, &[1]);
        let g = -1.5;
        let mut p = vec![0.0];
        state.step(&mut [&mut p], &[&[g]]).unwrap();
        state.step(&mut [&mut p], &[&[g]]).unwrap();
        // Hand-evaluated recurrence.
        let (b1, b2) = (c.beta1, c.beta2);
        let mut theta = 0.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        assert!((p[0] - theta).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_with_zero_lr_is_identity() {
        let mut state = AdamState::new(cfg(0.0, 0.5), &[2]);
        let mut p = vec![1.0, 3.0];
        state.step(&mut [&mut p], &[&[0.2, -0.1]]).unwrap();
        assert_eq!(p, vec![1.0, 3.0]);
    }

    #[test]
    fn decoupled_decay_is_applied_before_delta() {
        let c = cfg(0.1, 0.5);
        let mut state = AdamState::new(c, &[1]);
        let mut p = vec![2.0];
        state.step(&mut [&mut p], &[&[0.0]]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = AdamState::new(cfg(0.1, 0.0), &[2]);
        let mut p = vec![0.0; 3];
        assert!(matches!(
            state.step(&mut [&mut p], &[&[0.0; 3]]),
            Err(Error::Contract(_))
        ));
    }
}
