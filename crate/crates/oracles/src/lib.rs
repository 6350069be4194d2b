//! Reference computations for testing metricscope.
//!
//! Everything here works on plain `Vec<f64>` rows and `u32` labels and is
//! written as a literal transcription of each formula: explicit loops,
//! unstabilized exponentials, exhaustive enumeration, full sorts. None of it
//! shares code with `metricscope-core`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt()
}

// ---------------------------------------------------------------------------
// Random inputs
// ---------------------------------------------------------------------------

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn random_units(rng: &mut impl Rng, n: usize, dim: usize) -> Rows {
    (0..n).map(|_| random_unit(rng, dim)).collect()
}

pub fn random_gaussian(rng: &mut impl Rng, n: usize, dim: usize) -> Rows {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// `classes` labels with `per_class` members each, interleaved.
pub fn balanced_labels(classes: u32, per_class: usize) -> Vec<u32> {
    (0..per_class).flat_map(|_| 0..classes).collect()
}

/// Random orthogonal matrix (rows orthonormal) by Gram–Schmidt.
pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> Rows {
    let mut basis: Rows = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let p = dot(&v, b);
            for k in 0..dim {
                v[k] -= p * b[k];
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

pub fn rotate(q: &Rows, v: &[f64]) -> Vec<f64> {
    q.iter().map(|row| dot(row, v)).collect()
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for [`max_relative_error`]. Central-difference
/// round-off is about `ε·|L|/h`, roughly 1e-9 for ArcFace-scale losses, so
/// coordinates whose gradient is below this floor are effectively compared
/// with an absolute tolerance of `floor × tolerance`.
pub const FD_FLOOR: f64 = 1e-4;

/// Central-difference gradient of `f` at `x`, one coordinate at a time,
/// refined by Ridders' extrapolation from initial step `h`.
///
/// A fixed step is not enough near the ArcFace target-angle singularity:
/// with `cos θ_y` within ~1e-5 of ±1 the derivative changes faster than any
/// single `h` resolves. The tableau shrinks `h` geometrically and keeps the
/// estimate with the smallest extrapolation error plus round-off
/// `ROUNDOFF·ε·|f|/step`, so smooth coordinates stay on large steps.
pub fn central_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    const SHRINK: f64 = 1.4;
    const TABLE: usize = 16;
    const ROUNDOFF: f64 = 64.0;
    let mut probe = x.to_vec();
    let scale = f(x).abs().max(1.0) * f64::EPSILON * ROUNDOFF;
    (0..x.len())
        .map(|k| {
            let mut diff = |step: f64| {
                probe[k] = x[k] + step;
                let up = f(&probe);
                probe[k] = x[k] - step;
                let down = f(&probe);
                probe[k] = x[k];
                (up - down) / (2.0 * step)
            };
            let mut table = [[0.0f64; TABLE]; TABLE];
            let mut step = h;
            table[0][0] = diff(step);
            let mut best = table[0][0];
            let mut best_err = f64::INFINITY;
            for i in 1..TABLE {
                step /= SHRINK;
                table[0][i] = diff(step);
                let noise = scale / step;
                let mut factor = SHRINK * SHRINK;
                for j in 1..=i {
                    table[j][i] = (table[j - 1][i] * factor - table[j - 1][i - 1]) / (factor - 1.0);
                    factor *= SHRINK * SHRINK;
                    let err = (table[j][i] - table[j - 1][i])
                        .abs()
                        .max((table[j][i] - table[j - 1][i - 1]).abs())
                        + noise;
                    if err < best_err {
                        best_err = err;
                        best = table[j][i];
                    }
                }
            }
            best
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

pub fn contrastive(z: &Rows, y: &[u32], margin: f64) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i < j {
                let d = euclid(&z[i], &z[j]);
                total += if y[i] == y[j] {
                    d * d
                } else {
                    f64::max(0.0, margin - d).powi(2)
                };
                pairs += 1.0;
            }
        }
    }
    total / pairs
}

/// Per-anchor `max over (p, n)` of the hinge, enumerating every positive
/// and negative; anchors without a positive are left out.
pub fn triplet_per_anchor(z: &Rows, y: &[u32], margin: f64) -> Vec<f64> {
    let n = z.len();
    let mut out = Vec::new();
    for a in 0..n {
        let mut best: Option<f64> = None;
        let mut has_pos = false;
        for p in 0..n {
            if p == a || y[p] != y[a] {
                continue;
            }
            has_pos = true;
            for q in 0..n {
                if y[q] == y[a] {
                    continue;
                }
                let v = f64::max(0.0, euclid(&z[a], &z[p]) - euclid(&z[a], &z[q]) + margin);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        if has_pos {
            out.push(best.unwrap_or(0.0));
        }
    }
    out
}

/// Anchors are first occurrences of each class, positives second.
pub fn npair_per_anchor(z: &Rows, y: &[u32]) -> Vec<f64> {
    let mut classes: Vec<u32> = Vec::new();
    for &c in y {
        if !classes.contains(&c) {
            classes.push(c);
        }
    }
    let pair = |c: u32| {
        let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        (idx[0], idx[1])
    };
    classes
        .iter()
        .map(|&ci| {
            let (a, p) = pair(ci);
            let mut s = 0.0;
            for &cj in &classes {
                if cj != ci {
                    let (_, pj) = pair(cj);
                    s += (dot(&z[a], &z[pj]) - dot(&z[a], &z[p])).exp();
                }
            }
            (1.0 + s).ln()
        })
        .collect()
}

pub fn infonce_per_anchor(z: &Rows, y: &[u32], tau: f64) -> Vec<f64> {
    let n = z.len();
    let mut out = Vec::new();
    for i in 0..n {
        let mut pos: Option<usize> = None;
        for j in 0..n {
            if j != i && y[j] == y[i] && pos.is_none_or(|p| dot(&z[i], &z[j]) > dot(&z[i], &z[p])) {
                pos = Some(j);
            }
        }
        let Some(p) = pos else { continue };
        let mut denom = 0.0;
        for k in 0..n {
            if k != i {
                denom += (dot(&z[i], &z[k]) / tau).exp();
            }
        }
        out.push(-((dot(&z[i], &z[p]) / tau).exp() / denom).ln());
    }
    out
}

pub fn scl_per_anchor(z: &Rows, y: &[u32], tau: f64) -> Vec<f64> {
    let n = z.len();
    let mut out = Vec::new();
    for i in 0..n {
        let positives: Vec<usize> = (0..n).filter(|&j| j != i && y[j] == y[i]).collect();
        if positives.is_empty() {
            continue;
        }
        let mut denom = 0.0;
        for a in 0..n {
            if a != i {
                denom += (dot(&z[i], &z[a]) / tau).exp();
            }
        }
        let mut s = 0.0;
        for &p in &positives {
            s += ((dot(&z[i], &z[p]) / tau).exp() / denom).ln();
        }
        out.push(-s / positives.len() as f64);
    }
    out
}

/// `centers[k]` belongs to class `classes[k]`.
pub fn arcface_per_sample(z: &Rows, y: &[u32], classes: &[u32], centers: &Rows, margin: f64, scale: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut target = 0.0;
            let mut denom = 0.0;
            for (k, &c) in classes.iter().enumerate() {
                let cos = dot(&z[i], &centers[k]);
                let logit = if c == y[i] {
                    let theta = cos.clamp(-1.0, 1.0).acos();
                    let l = scale * (theta + margin).cos();
                    target = l;
                    l
                } else {
                    scale * cos
                };
                denom += logit.exp();
            }
            -(target.exp() / denom).ln()
        })
        .collect()
}

pub fn arcface_flags(z: &Rows, y: &[u32], classes: &[u32], centers: &Rows, margin: f64, scale: f64) -> Vec<bool> {
    (0..z.len())
        .map(|i| {
            let k_y = classes.iter().position(|&c| c == y[i]).unwrap();
            let theta = dot(&z[i], &centers[k_y]).clamp(-1.0, 1.0).acos();
            let target = scale * (theta + margin).cos();
            (0..classes.len()).any(|k| k != k_y && scale * dot(&z[i], &centers[k]) >= target)
        })
        .collect()
}

pub fn ccl_per_sample(z: &Rows, y: &[u32], classes: &[u32], centers: &Rows, tau: f64, lambda: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let k_y = classes.iter().position(|&c| c == y[i]).unwrap();
            let mut denom = 0.0;
            for center in centers {
                denom += (dot(&z[i], center) / tau).exp();
            }
            let own = dot(&z[i], &centers[k_y]);
            -((own / tau).exp() / denom).ln() + lambda * (1.0 - own)
        })
        .collect()
}

/// Closer (cosine distance) to some other class's center than to its own.
pub fn ccl_flags(z: &Rows, y: &[u32], classes: &[u32], centers: &Rows) -> Vec<bool> {
    (0..z.len())
        .map(|i| {
            let k_y = classes.iter().position(|&c| c == y[i]).unwrap();
            let own = 1.0 - dot(&z[i], &centers[k_y]);
            let mut nearest_other = f64::INFINITY;
            for (k, center) in centers.iter().enumerate() {
                if k != k_y {
                    nearest_other = nearest_other.min(1.0 - dot(&z[i], center));
                }
            }
            own > nearest_other
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// ---------------------------------------------------------------------------
// Variance
// ---------------------------------------------------------------------------

fn distinct(y: &[u32]) -> Vec<u32> {
    let mut c: Vec<u32> = y.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

fn centroid(z: &Rows, y: &[u32], c: u32) -> Vec<f64> {
    let dim = z[0].len();
    let mut mu = vec![0.0; dim];
    let mut count = 0.0;
    for i in 0..z.len() {
        if y[i] == c {
            for k in 0..dim {
                mu[k] += z[i][k];
            }
            count += 1.0;
        }
    }
    for v in &mut mu {
        *v /= count;
    }
    mu
}

/// Double-loop transcription of the intra/inter squared-norm variances.
pub fn centroid_variance(z: &Rows, y: &[u32]) -> (f64, Option<f64>) {
    let classes = distinct(y);
    let c = classes.len() as f64;
    let mus: Rows = classes.iter().map(|&k| centroid(z, y, k)).collect();
    let mut intra = 0.0;
    for (ci, &k) in classes.iter().enumerate() {
        let mut s = 0.0;
        let mut count = 0.0;
        for i in 0..z.len() {
            if y[i] == k {
                s += euclid(&z[i], &mus[ci]).powi(2);
                count += 1.0;
            }
        }
        intra += s / count;
    }
    intra /= c;
    if classes.len() < 2 {
        return (intra, None);
    }
    let mut inter = 0.0;
    for a in 0..classes.len() {
        for b in 0..classes.len() {
            if a != b {
                inter += euclid(&mus[a], &mus[b]).powi(2);
            }
        }
    }
    (intra, Some(inter / (c * (c - 1.0))))
}

/// Pooled intra and unordered-pair inter cosine distances against
/// re-normalized centroids: `(intra_mean, intra_var, inter_mean, inter_var)`.
pub fn cosine_stats(z: &Rows, y: &[u32]) -> (f64, f64, Option<f64>, Option<f64>) {
    let classes = distinct(y);
    let unit = |v: Vec<f64>| {
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mus: Rows = classes.iter().map(|&k| unit(centroid(z, y, k))).collect();
    let mut intra = Vec::new();
    for (ci, &k) in classes.iter().enumerate() {
        for i in 0..z.len() {
            if y[i] == k {
                intra.push(1.0 - dot(&z[i], &mus[ci]));
            }
        }
    }
    let mut inter = Vec::new();
    for a in 0..mus.len() {
        for b in (a + 1)..mus.len() {
            inter.push(1.0 - dot(&mus[a], &mus[b]));
        }
    }
    let var = |xs: &[f64]| {
        let m = mean(xs);
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    if inter.is_empty() {
        (mean(&intra), var(&intra), None, None)
    } else {
        (mean(&intra), var(&intra), Some(mean(&inter)), Some(var(&inter)))
    }
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

/// Full distance matrix, full sort per query (distance, then index).
pub fn recall(z: &Rows, y: &[u32], ks: &[usize]) -> Vec<f64> {
    let n = z.len();
    let matrix: Rows = (0..n)
        .map(|i| (0..n).map(|j| 1.0 - dot(&z[i], &z[j])).collect())
        .collect();
    let mut hits = vec![0usize; ks.len()];
    for q in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != q).collect();
        order.sort_by(|&a, &b| matrix[q][a].total_cmp(&matrix[q][b]).then(a.cmp(&b)));
        for (slot, &k) in ks.iter().enumerate() {
            if order.iter().take(k).any(|&j| y[j] == y[q]) {
                hits[slot] += 1;
            }
        }
    }
    hits.into_iter().map(|h| h as f64 / n as f64).collect()
}

pub fn sorted_neighbors(query: &[f64], gallery: &Rows) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = gallery
        .iter()
        .enumerate()
        .map(|(i, g)| (i, 1.0 - dot(query, g)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}
