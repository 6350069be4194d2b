use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::grad::{GradSnapshot, ParamGrad};
use crate::error::{Error, Result};
use crate::math::LabeledSet;
use crate::rng::seeded_rng;

/// Layer widths of the head: `d_in → d_hidden → d_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadDims {
    pub d_in: usize,
    pub d_hidden: usize,
    pub d_out: usize,
}

impl HeadDims {
    pub fn new(d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        HeadDims { d_in, d_hidden, d_out }
    }

    pub fn param_count(&self) -> usize {
        self.d_in * self.d_hidden + self.d_hidden + self.d_hidden * self.d_out + self.d_out
    }

    /// Element counts of `w1, b1, w2, b2`.
    pub fn shapes(&self) -> [usize; 4] {
        [
            self.d_hidden * self.d_in,
            self.d_hidden,
            self.d_out * self.d_hidden,
            self.d_out,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

pub const PARAM_NAMES: [&str; 4] = ["w1", "b1", "w2", "b2"];

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// `x → L2norm(W2 · dropout(tanh(W1 x + b1)) + b2)`.
///
/// Weights are row-major: `w1` is `d_hidden × d_in`, `w2` is
/// `d_out × d_hidden`. Dropout is inverted, so inference is a plain pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    dims: HeadDims,
    dropout_rate: f64,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    // Changes whenever parameters may have been mutated; ties caches to
    // the parameters that produced them.
    version: u64,
}

/// Intermediate values kept by [`ProjectionHead::forward`] for backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    rows: usize,
    inputs: Vec<f64>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    pre_norms: Vec<f64>,
    outputs: Vec<f64>,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

impl ProjectionHead {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: HeadDims, dropout_rate: f64, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, 0x4845_4144);
        let mut glorot = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect()
        };
        let w1 = glorot(dims.d_in, dims.d_hidden);
        let w2 = glorot(dims.d_hidden, dims.d_out);
        Self::from_parts(
            dims,
            dropout_rate,
            [w1, vec![0.0; dims.d_hidden], w2, vec![0.0; dims.d_out]],
        )
    }

    pub fn from_parts(dims: HeadDims, dropout_rate: f64, params: [Vec<f64>; 4]) -> Result<Self> {
        if dims.d_in == 0 || dims.d_hidden == 0 || dims.d_out == 0 {
            return Err(Error::Parameter("head dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Parameter(format!("dropout rate {dropout_rate} outside [0, 1)")));
        }
        for (tensor, expected) in params.iter().zip(dims.shapes()) {
            if tensor.len() != expected {
                return Err(Error::Shape {
                    expected,
                    actual: tensor.len(),
                });
            }
        }
        let [w1, b1, w2, b2] = params;
        Ok(ProjectionHead {
            dims,
            dropout_rate,
            w1,
            b1,
            w2,
            b2,
            version: fresh_version(),
        })
    }

    pub fn dims(&self) -> HeadDims {
        self.dims
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn param_count(&self) -> usize {
        self.dims.param_count()
    }

    pub fn params(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// Mutable parameter tensors in `w1, b1, w2, b2` order. Invalidates any
    /// outstanding forward cache.
    pub fn params_mut(&mut self) -> [&mut [f64]; 4] {
        self.version = fresh_version();
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward(&self, features: &LabeledSet, mode: Mode, rng_seed: u64) -> Result<(LabeledSet, ForwardCache)> {
        let HeadDims { d_in, d_hidden, d_out } = self.dims;
        if features.dim() != d_in {
            return Err(Error::Shape {
                expected: d_in,
                actual: features.dim(),
            });
        }
        let rows = features.len();
        let mut hidden = vec![0.0; rows * d_hidden];
        let mut dropped = vec![0.0; rows * d_hidden];
        let mut outputs = vec![0.0; rows * d_out];
        let mut pre_norms = vec![0.0; rows];

        let mask = match mode {
            Mode::Training if self.dropout_rate > 0.0 => {
                let mut rng = seeded_rng(rng_seed, 0x4d41_534b);
                let keep = 1.0 / (1.0 - self.dropout_rate);
                Some(
                    (0..rows * d_hidden)
                        .map(|_| {
                            if rng.random::<f64>() < self.dropout_rate {
                                0.0
                            } else {
                                keep
                            }
                        })
                        .collect::<Vec<f64>>(),
                )
            }
            _ => None,
        };

        for (r, x) in features.rows().enumerate() {
            let h = &mut hidden[r * d_hidden..(r + 1) * d_hidden];
            for (k, hk) in h.iter_mut().enumerate() {
                let w = &self.w1[k * d_in..(k + 1) * d_in];
                *hk = (dot(w, x) + self.b1[k]).tanh();
            }
            let hd = &mut dropped[r * d_hidden..(r + 1) * d_hidden];
            match &mask {
                Some(m) => {
                    let m = &m[r * d_hidden..(r + 1) * d_hidden];
                    for ((o, a), s) in hd.iter_mut().zip(h.iter()).zip(m) {
                        *o = a * s;
                    }
                }
                None => hd.copy_from_slice(h),
            }
            let u = &mut outputs[r * d_out..(r + 1) * d_out];
            for (k, uk) in u.iter_mut().enumerate() {
                let w = &self.w2[k * d_hidden..(k + 1) * d_hidden];
                *uk = dot(w, hd) + self.b2[k];
            }
            let norm = dot(u, u).sqrt();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!("head output for row {r} is not finite")));
            }
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "head output for row {r} is zero, cannot normalize"
                )));
            }
            pre_norms[r] = norm;
            u.iter_mut().for_each(|v| *v /= norm);
        }

        let embeddings = LabeledSet::new(d_out, outputs.clone(), features.labels().to_vec())?;
        let cache = ForwardCache {
            version: self.version,
            rows,
            inputs: features.values().to_vec(),
            hidden,
            mask,
            dropped,
            pre_norms,
            outputs,
        };
        Ok((embeddings, cache))
    }

    /// Inference-mode forward without keeping a cache.
    pub fn embed(&self, features: &LabeledSet) -> Result<LabeledSet> {
        self.forward(features, Mode::Inference, 0).map(|(e, _)| e)
    }

    /// Backpropagates `grad_embeddings` (∂L/∂z, row-major) to all four
    /// parameter tensors.
    pub fn backward(&self, cache: &ForwardCache, grad_embeddings: &[f64]) -> Result<GradSnapshot> {
        let HeadDims { d_in, d_hidden, d_out } = self.dims;
        if cache.version != self.version {
            return Err(Error::Contract(
                "forward cache is stale: parameters changed since it was produced".into(),
            ));
        }
        if grad_embeddings.len() != cache.rows * d_out {
            return Err(Error::Contract(format!(
                "expected {} embedding gradients, got {}",
                cache.rows * d_out,
                grad_embeddings.len()
            )));
        }

        let mut gw1 = vec![0.0; d_hidden * d_in];
        let mut gb1 = vec![0.0; d_hidden];
        let mut gw2 = vec![0.0; d_out * d_hidden];
        let mut gb2 = vec![0.0; d_out];
        let mut gu = vec![0.0; d_out];
        let mut gh = vec![0.0; d_hidden];

        for r in 0..cache.rows {
            let g = &grad_embeddings[r * d_out..(r + 1) * d_out];
            let z = &cache.outputs[r * d_out..(r + 1) * d_out];
            // Through u → u/‖u‖: (g − (g·z) z) / ‖u‖
            let along = dot(g, z);
            let inv_norm = 1.0 / cache.pre_norms[r];
            for ((o, gk), zk) in gu.iter_mut().zip(g).zip(z) {
                *o = (gk - along * zk) * inv_norm;
            }

            let hd = &cache.dropped[r * d_hidden..(r + 1) * d_hidden];
            gh.iter_mut().for_each(|v| *v = 0.0);
            for (k, &guk) in gu.iter().enumerate() {
                gb2[k] += guk;
                if guk == 0.0 {
                    continue;
                }
                let row = k * d_hidden..(k + 1) * d_hidden;
                axpy(&mut gw2[row.clone()], guk, hd);
                axpy(&mut gh, guk, &self.w2[row]);
            }

            let h = &cache.hidden[r * d_hidden..(r + 1) * d_hidden];
            if let Some(mask) = &cache.mask {
                for (v, m) in gh.iter_mut().zip(&mask[r * d_hidden..(r + 1) * d_hidden]) {
                    *v *= m;
                }
            }
            let x = &cache.inputs[r * d_in..(r + 1) * d_in];
            for (k, (&ghk, &hk)) in gh.iter().zip(h).enumerate() {
                let pre = ghk * (1.0 - hk * hk);
                gb1[k] += pre;
                if pre != 0.0 {
                    axpy(&mut gw1[k * d_in..(k + 1) * d_in], pre, x);
                }
            }
        }

        Ok(GradSnapshot::new(
            PARAM_NAMES
                .iter()
                .zip([gw1, gb1, gw2, gb2])
                .map(|(name, values)| ParamGrad::new(*name, values))
                .collect(),
        ))
    }

    /// Applies one Adam step using the head groups of `grads`.
    pub fn apply_adam(&mut self, state: &mut AdamState, grads: &GradSnapshot) -> Result<()> {
        let slices: Vec<&[f64]> = PARAM_NAMES
            .iter()
            .map(|name| {
                grads
                    .group(name)
                    .map(|g| g.values.as_slice())
                    .ok_or_else(|| Error::Contract(format!("gradient snapshot lacks group {name}")))
            })
            .collect::<Result<_>>()?;
        let mut params = self.params_mut();
        state.step(&mut params, &slices)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
