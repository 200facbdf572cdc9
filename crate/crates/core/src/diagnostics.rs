//! Embedding-model diagnostics: KNN feature alignment, Spearman alignment
//! and PCA projection for plotting.

use std::hash::Hash;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, distance};
use crate::neighbors::{self, Strategy};

/// Mean fraction of each point's k nearest neighbours sharing its label.
pub fn knn_feature_alignment<L: Eq + Hash + Sync>(x: &EmbeddingMatrix, labels: &[L], k: usize) -> Result<f64> {
    if labels.len() != x.rows() {
        return Err(Error::RowMismatch {
            source_id: "labels".into(),
            expected: x.rows(),
            got: labels.len(),
        });
    }
    if k >= x.rows() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be smaller than the number of points ({})",
            x.rows()
        )));
    }
    let nn = neighbors::knn_indices(x, k, Strategy::Auto)?;
    let total: f64 = nn
        .iter()
        .enumerate()
        .map(|(i, js)| js.iter().filter(|&&j| labels[j] == labels[i]).count() as f64 / k as f64)
        .sum();
    Ok(total / x.rows() as f64)
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(u: &[f64], v: &[f64]) -> Option<f64> {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        suv += (a - mu) * (b - mv);
        suu += (a - mu) * (a - mu);
        svv += (b - mv) * (b - mv);
    }
    if suu == 0.0 || svv == 0.0 {
        None
    } else {
        Some((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
    }
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    if u.len() < 3 {
        return Err(Error::TooFew {
            what: "Spearman correlation",
            needed: 3,
            got: u.len(),
        });
    }
    pearson(&average_ranks(u), &average_ranks(v))
        .ok_or_else(|| Error::Numerical("rank variance is zero (all values tied)".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpearmanAlignmentParams {
    /// Above 2000 points, compare this many random pairs instead of all of them.
    #[serde(default)]
    pub subsample_pairs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

const SUBSAMPLE_MIN_POINTS: usize = 2000;

/// Spearman correlation between pairwise embedding distances and pairwise
/// property distances (absolute difference, or Euclidean for vectors).
pub fn spearman_alignment(
    x: &EmbeddingMatrix,
    properties: &[Vec<f64>],
    params: SpearmanAlignmentParams,
) -> Result<f64> {
    let n = x.rows();
    if properties.len() != n {
        return Err(Error::RowMismatch {
            source_id: "property".into(),
            expected: n,
            got: properties.len(),
        });
    }
    if n < 3 {
        return Err(Error::TooFew {
            what: "Spearman alignment",
            needed: 3,
            got: n,
        });
    }
    let pairs: Vec<(usize, usize)> = match params.subsample_pairs {
        Some(count) if n > SUBSAMPLE_MIN_POINTS => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            (0..count)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i.min(j), i.max(j))
                })
                .collect()
        }
        _ => (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect(),
    };
    let emb: Vec<f64> = crate::par::map_slice(&pairs, |&(i, j)| distance(x.row(i), x.row(j)));
    let prop: Vec<f64> = pairs.iter().map(|&(i, j)| distance(&properties[i], &properties[j])).collect();
    if prop.iter().all(|&d| d == prop[0]) {
        return Err(Error::Numerical(
            "property distances are all tied (constant property); Spearman alignment is undefined".into(),
        ));
    }
    spearman_rho(&emb, &prop)
}

/// PCA projection of an embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// n rows of `out_dim` coordinates.
    pub coords: Vec<Vec<f64>>,
    /// Fraction of total variance per component.
    pub explained: Vec<f64>,
    /// Set when fewer than `out_dim` non-degenerate components exist.
    pub warning: Option<String>,
}

/// Projects mean-centred rows onto the top principal components.
///
/// Each component's sign is fixed so its largest-magnitude loading is
/// positive (first such coordinate on ties).
pub fn pca_project(x: &EmbeddingMatrix, out_dim: usize) -> Result<PcaProjection> {
    let (n, d) = (x.rows(), x.dim());
    if !(2..=3).contains(&out_dim) {
        return Err(Error::InvalidParameter(format!("PCA output must be 2-D or 3-D, got {out_dim}")));
    }
    if n < out_dim.max(2) {
        return Err(Error::TooFew {
            what: "PCA projection",
            needed: out_dim.max(2),
            got: n,
        });
    }
    let (mean, cov) = linalg::mean_and_covariance(x)?;
    let (mut values, vectors) = linalg::sorted_symmetric_eigen(&cov)?;
    linalg::clamp_spectrum(&mut values);
    let total: f64 = values.iter().sum();

    let usable = values.iter().take(out_dim).filter(|&&v| v > 0.0).count();
    let warning = (usable < out_dim).then(|| {
        let msg = format!("data has rank {usable} < {out_dim}; trailing PCA components are zero");
        warn!("{msg}");
        msg
    });

    let mut components = DMatrix::zeros(d, out_dim);
    let mut explained = vec![0.0; out_dim];
    for c in 0..usable {
        let mut v: Vec<f64> = vectors.column(c).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best });
        if pivot.1 < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (r, x) in v.into_iter().enumerate() {
            components[(r, c)] = x;
        }
        explained[c] = if total > 0.0 { values[c] / total } else { 0.0 };
    }

    let coords = x
        .iter_rows()
        .map(|row| {
            (0..out_dim)
                .map(|c| (0..d).map(|r| (row[r] - mean[r]) * components[(r, c)]).sum())
                .collect()
        })
        .collect();
    Ok(PcaProjection {
        coords,
        explained,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        let u = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman_rho(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&u, &rev).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman_rho(&u, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(spearman_rho(&u, &[2.0; 4]).is_err());
        assert!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn fas_single_label() {
        let x = EmbeddingMatrix::from_column(&[0.0, 3.0, 1.0, 7.0], "x").unwrap();
        assert_eq!(knn_feature_alignment(&x, &[1, 1, 1, 1], 2).unwrap(), 1.0);
        assert!(knn_feature_alignment(&x, &[1, 1, 1, 1], 4).is_err());
    }

    #[test]
    fn spearman_alignment_sign_invariant() {
        let vals = [0.3, 1.2, -0.5, 2.2, 0.9];
        let props: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
        let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
        let x = EmbeddingMatrix::from_column(&neg, "x").unwrap();
        let rho = spearman_alignment(&x, &props, SpearmanAlignmentParams::default()).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        let flat: Vec<Vec<f64>> = vec![vec![1.0]; 5];
        assert!(spearman_alignment(&x, &flat, SpearmanAlignmentParams::default()).is_err());
    }

    #[test]
    fn pca_pads_rank_deficient_output() {
        let x = EmbeddingMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], "x").unwrap();
        let p = pca_project(&x, 2).unwrap();
        assert!(p.warning.is_some());
        assert!((p.explained[0] - 1.0).abs() < 1e-12);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
        // sign convention: first coordinate increases along the data
        assert!(p.coords[2][0] > p.coords[0][0]);
    }
}
