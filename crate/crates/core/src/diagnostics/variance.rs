use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{class_centroids, cosine_distance, l2_normalize, LabeledSet};

/// Squared-norm spread of a labeled set.
///
/// `intra = (1/C) Σ_c (1/N_c) Σ_{i∈c} ‖z_i − μ_c‖²` and
/// `inter = 1/(C(C−1)) Σ_{c≠c'} ‖μ_c − μ_c'‖²` over ordered pairs. `inter`
/// is `None` with a single class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidVariance {
    pub intra: f64,
    pub inter: Option<f64>,
}

pub fn centroid_variance(set: &LabeledSet) -> CentroidVariance {
    let centroids = class_centroids(set);
    let members = set.class_members();
    let c = centroids.len();

    let intra = members
        .iter()
        .map(|(class, idx)| {
            let mu = &centroids[class];
            idx.iter().map(|&i| squared_distance(set.row(i), mu)).sum::<f64>() / idx.len() as f64
        })
        .sum::<f64>()
        / c as f64;

    let inter = (c >= 2).then(|| {
        let mus: Vec<&Vec<f64>> = centroids.values().collect();
        let mut total = 0.0;
        for (a, mu_a) in mus.iter().enumerate() {
            for (b, mu_b) in mus.iter().enumerate() {
                if a != b {
                    total += squared_distance(mu_a, mu_b);
                }
            }
        }
        total / (c * (c - 1)) as f64
    });

    CentroidVariance { intra, inter }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStat {
    pub mean: f64,
    pub var: f64,
}

/// Cosine-distance statistics of an embedding set, plus the squared-norm
/// variances of [`centroid_variance`].
///
/// Intra statistics pool `d_cos(z_i, μ̂_{y_i})` over all samples; inter
/// statistics cover `d_cos(μ̂_c, μ̂_c')` over unordered class pairs. `μ̂` is
/// the class centroid rescaled to unit length. Variances are population
/// variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub class_count: usize,
    pub sigma2_intra_centroid: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma2_inter_centroid: Option<f64>,
    pub intra_mean: f64,
    pub intra_var: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inter_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inter_var: Option<f64>,
    pub per_class_intra: BTreeMap<u32, ClassStat>,
}

pub fn cosine_distance_stats(set: &LabeledSet) -> Result<VarianceReport> {
    if !set.is_normalized() {
        return Err(Error::Precondition(
            "cosine statistics expect unit-norm embeddings".into(),
        ));
    }
    let unit_centroids: BTreeMap<u32, Vec<f64>> = class_centroids(set)
        .into_iter()
        .map(|(class, mu)| {
            l2_normalize(&mu)
                .map(|u| (class, u))
                .map_err(|_| Error::DegenerateCentroid(class))
        })
        .collect::<Result<_>>()?;

    let mut pooled = Vec::with_capacity(set.len());
    let mut per_class_intra = BTreeMap::new();
    for (class, idx) in set.class_members() {
        let mu = &unit_centroids[&class];
        let dists = idx
            .iter()
            .map(|&i| cosine_distance(set.row(i), mu))
            .collect::<Result<Vec<_>>>()?;
        let (mean, var) = mean_var(&dists);
        per_class_intra.insert(class, ClassStat { mean, var });
        pooled.extend(dists);
    }
    let (intra_mean, intra_var) = mean_var(&pooled);

    let mus: Vec<&Vec<f64>> = unit_centroids.values().collect();
    let mut inter = Vec::new();
    for a in 0..mus.len() {
        for b in (a + 1)..mus.len() {
            inter.push(cosine_distance(mus[a], mus[b])?);
        }
    }
    let (inter_mean, inter_var) = if inter.is_empty() {
        (None, None)
    } else {
        let (m, v) = mean_var(&inter);
        (Some(m), Some(v))
    };

    let centroid = centroid_variance(set);
    Ok(VarianceReport {
        class_count: unit_centroids.len(),
        sigma2_intra_centroid: centroid.intra,
        sigma2_inter_centroid: centroid.inter,
        intra_mean,
        intra_var,
        inter_mean,
        inter_var,
        per_class_intra,
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_on_centroids_have_zero_intra() {
        let set = LabeledSet::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![-3.0, 0.5]], vec![0, 0, 1]).unwrap();
        assert_eq!(centroid_variance(&set).intra, 0.0);
    }

    #[test]
    fn two_centroids_two_apart() {
        let set = LabeledSet::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]], vec![0, 1]).unwrap();
        assert_eq!(centroid_variance(&set).inter, Some(4.0));
    }

    #[test]
    fn single_class_has_no_inter() {
        let set = LabeledSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![5, 5]).unwrap();
        assert_eq!(centroid_variance(&set).inter, None);
        let report = cosine_distance_stats(&set).unwrap();
        assert_eq!(report.inter_mean, None);
        assert_eq!(report.inter_var, None);
        let json = serde_json::to_value(&report).unwrap();
        assert!(json.get("inter_mean").is_none());
    }

    #[test]
    fn identical_members_and_orthogonal_centroids() {
        let set = LabeledSet::from_rows(
            &[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let report = cosine_distance_stats(&set).unwrap();
        assert_eq!(report.intra_mean, 0.0);
        assert_eq!(report.per_class_intra[&0].mean, 0.0);
        assert_eq!(report.inter_mean, Some(1.0));
        assert_eq!(report.inter_var, Some(0.0));
    }

    #[test]
    fn antipodal_members_are_degenerate() {
        let set = LabeledSet::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], vec![0, 0, 1]).unwrap();
        assert!(matches!(cosine_distance_stats(&set), Err(Error::DegenerateCentroid(0))));
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let set = LabeledSet::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]], vec![0, 1]).unwrap();
        assert!(matches!(cosine_distance_stats(&set), Err(Error::Precondition(_))));
    }
}
