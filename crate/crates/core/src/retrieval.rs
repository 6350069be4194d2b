//! Exhaustive nearest-neighbor retrieval under cosine distance.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, is_unit, norm, LabeledSet};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub k_values: Vec<usize>,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub query_count: usize,
    /// Queries whose class has no other member; counted as misses.
    pub singleton_queries: usize,
}

impl RecallReport {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.recall_at_k.get(&k).copied()
    }
}

fn check_unit(set: &LabeledSet) -> Result<()> {
    match set.rows().position(|r| !is_unit(r)) {
        None => Ok(()),
        Some(i) => Err(Error::Precondition(format!(
            "retrieval expects unit-norm embeddings; row {i} has norm {}",
            norm(set.row(i))
        ))),
    }
}

/// Orders by distance, then by index.
fn rank_order(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` gallery items closest to `query`, ascending by cosine distance
/// with ties broken by lower index.
pub fn nearest_neighbors(query: &[f64], gallery: &LabeledSet, k: usize) -> Result<Vec<(usize, f64)>> {
    if query.len() != gallery.dim() {
        return Err(Error::Shape {
            expected: gallery.dim(),
            actual: query.len(),
        });
    }
    if k > gallery.len() {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds gallery size {}",
            gallery.len()
        )));
    }
    if !is_unit(query) {
        return Err(Error::Precondition("query must be unit-norm".into()));
    }
    check_unit(gallery)?;
    let mut scored: Vec<(usize, f64)> = gallery
        .rows()
        .enumerate()
        .map(|(i, g)| (i, 1.0 - dot(query, g)))
        .collect();
    scored.sort_by(|a, b| rank_order((a.1, a.0), (b.1, b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Leave-one-out Recall@k: each sample queries all others; a hit at `k`
/// means a same-class item sits in the top `k`.
pub fn recall_at_k(set: &LabeledSet, ks: &[usize]) -> Result<RecallReport> {
    let n = set.len();
    if ks.is_empty() {
        return Err(Error::Parameter("no k values requested".into()));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k >= n) {
        return Err(Error::Parameter(format!(
            "k = {bad} must lie in 1..{n} for a set of {n} items"
        )));
    }
    check_unit(set)?;

    // Rank (0-based) of the best same-class neighbor for each query.
    let mut first_hit: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut distances = vec![0.0; n];
    for q in 0..n {
        let zq = set.row(q);
        for (j, d) in distances.iter_mut().enumerate() {
            *d = 1.0 - dot(zq, set.row(j));
        }
        let best = (0..n)
            .filter(|&j| j != q && set.label(j) == set.label(q))
            .map(|j| (distances[j], j))
            .min_by(|a, b| rank_order(*a, *b));
        first_hit.push(best.map(|b| {
            (0..n)
                .filter(|&j| j != q && rank_order((distances[j], j), b) == Ordering::Less)
                .count()
        }));
    }

    let singleton_queries = first_hit.iter().filter(|h| h.is_none()).count();
    if singleton_queries > 0 {
        info!("recall: {singleton_queries} queries have no same-class neighbor");
    }
    let recall_at_k = ks
        .iter()
        .map(|&k| {
            let hits = first_hit.iter().filter(|h| h.is_some_and(|r| r < k)).count();
            (k, hits as f64 / n as f64)
        })
        .collect();
    Ok(RecallReport {
        k_values: ks.to_vec(),
        recall_at_k,
        query_count: n,
        singleton_queries,
    })
}
