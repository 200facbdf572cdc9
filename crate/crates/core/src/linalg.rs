//! Dense linear-algebra helpers shared by the embedding metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::par;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_RELATIVE_FLOOR: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-10;

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Column means and the sample (n − 1) covariance of the rows of `x`.
pub fn mean_and_covariance(x: &EmbeddingMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, d) = (x.rows(), x.dim());
    if n < 2 {
        return Err(Error::TooFew {
            what: "covariance estimate",
            needed: 2,
            got: n,
        });
    }
    let mut mean = DVector::zeros(d);
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;

    let mut centered = DMatrix::zeros(n, d);
    for (i, row) in x.iter_rows().enumerate() {
        for j in 0..d {
            centered[(i, j)] = row[j] - mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered;
    cov /= (n - 1) as f64;
    symmetrize(&mut cov);
    Ok((mean, cov))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
    }
    let scale = 1.0 + m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Numerical(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix with values below
/// [`EIGEN_RELATIVE_FLOOR`] × max clamped to zero, sorted descending.
pub fn clamped_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    clamp_spectrum(&mut values);
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub(crate) fn clamp_spectrum(values: &mut [f64]) {
    let max = values.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let floor = EIGEN_RELATIVE_FLOOR * max;
    for v in values.iter_mut() {
        if *v < floor {
            *v = 0.0;
        }
    }
}

/// Symmetric eigendecomposition with eigenpairs sorted by decreasing eigenvalue.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Principal square root of a symmetric positive semi-definite matrix.
///
/// Computed from the symmetric eigendecomposition with small negative
/// eigenvalues clamped to zero, so the result is symmetric PSD.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    clamp_spectrum(&mut values);
    let roots = DVector::from_iterator(values.len(), values.iter().map(|v| v.sqrt()));
    let q = &eig.eigenvectors;
    let mut s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    symmetrize(&mut s);
    Ok(s)
}

/// All pairwise Euclidean distances `(i < j)` of the rows, in row-major pair order.
pub fn pairwise_distances(x: &EmbeddingMatrix) -> Vec<f64> {
    let n = x.rows();
    par::map_range(n, |i| {
        let a = x.row(i);
        ((i + 1)..n).map(|j| distance(a, x.row(j))).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Median of a non-empty sample; the mean of the two middle values for even sizes.
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower + upper))
    }
}

/// Median pairwise distance over the union of the given point sets.
pub fn median_heuristic(sets: &[&EmbeddingMatrix]) -> Result<f64> {
    let dim = sets.first().map_or(0, |s| s.dim());
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    for s in sets {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch(dim, s.dim()));
        }
        rows.extend_from_slice(s.data());
        n += s.rows();
    }
    let pooled = EmbeddingMatrix::new(n, dim, rows, "pooled")?;
    let sigma = median(pairwise_distances(&pooled)).ok_or(Error::TooFew {
        what: "median heuristic",
        needed: 2,
        got: n,
    })?;
    if sigma <= 0.0 {
        return Err(Error::Numerical(
            "median pairwise distance is 0 (most points coincide); pass an explicit bandwidth".into(),
        ));
    }
    Ok(sigma)
}
