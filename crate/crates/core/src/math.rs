//! Vector primitives shared by every other module.
//!
//! Vectors are plain `&[f64]` slices. [`LabeledSet`] stores a batch of
//! equal-length vectors row-major together with their integer class ids.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Tolerance used when a unit-norm precondition is checked.
pub const UNIT_NORM_TOL: f64 = 1e-6;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Returns `v / ‖v‖₂`.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate(format!("cannot normalize a vector with norm {n}")));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// True when `‖v‖₂` is within [`UNIT_NORM_TOL`] of one.
pub fn is_unit(v: &[f64]) -> bool {
    (norm(v) - 1.0).abs() <= UNIT_NORM_TOL
}

/// `1 − ⟨a, b⟩` for unit-norm inputs.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    for v in [a, b] {
        if !is_unit(v) {
            return Err(Error::Precondition(format!(
                "cosine distance expects unit vectors, got norm {}",
                norm(v)
            )));
        }
    }
    Ok(1.0 - dot(a, b))
}

/// A non-empty set of equal-dimension vectors with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<u32>,
}

impl LabeledSet {
    /// Builds a set from row-major `values` (`labels.len() × dim`).
    pub fn new(dim: usize, values: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("vector dimension must be positive".into()));
        }
        if labels.is_empty() {
            return Err(Error::Parameter("labeled set must hold at least one vector".into()));
        }
        if values.len() != labels.len() * dim {
            return Err(Error::Shape {
                expected: labels.len() * dim,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(LabeledSet { dim, values, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u32>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::Shape {
                expected: labels.len(),
                actual: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<u32> {
        let mut ids = self.labels.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Member indices per class, ascending by class id.
    pub fn class_members(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &y) in self.labels.iter().enumerate() {
            members.entry(y).or_default().push(i);
        }
        members
    }

    /// True when every row is unit-norm within [`UNIT_NORM_TOL`].
    pub fn is_normalized(&self) -> bool {
        self.rows().all(is_unit)
    }

    /// Returns a copy with each row L2-normalized.
    pub fn normalized(&self) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            values.extend(l2_normalize(row)?);
        }
        Ok(LabeledSet {
            dim: self.dim,
            values,
            labels: self.labels.clone(),
        })
    }

    /// Applies `f` to every row in place.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            let out = f(row);
            if out.len() != self.dim {
                return Err(Error::Shape {
                    expected: self.dim,
                    actual: out.len(),
                });
            }
            values.extend(out);
        }
        Self::new(self.dim, values, self.labels.clone())
    }

    /// Subset with the given row indices, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Parameter(format!(
                    "row {i} out of range for a set of {}",
                    self.len()
                )));
            }
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(self.dim, values, labels)
    }
}

/// Arithmetic mean of each class's members. Centroids are not re-normalized.
pub fn class_centroids(set: &LabeledSet) -> BTreeMap<u32, Vec<f64>> {
    set.class_members()
        .into_iter()
        .map(|(class, members)| {
            let mut mean = vec![0.0; set.dim()];
            for &i in &members {
                for (m, x) in mean.iter_mut().zip(set.row(i)) {
                    *m += x;
                }
            }
            let inv = 1.0 / members.len() as f64;
            mean.iter_mut().for_each(|m| *m *= inv);
            (class, mean)
        })
        .collect()
}
