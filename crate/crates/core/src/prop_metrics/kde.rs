//! Gaussian kernel density estimation and KL divergence estimates.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;

/// KDE bandwidth policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdeBandwidth {
    /// Data covariance scaled by n^(−2/(d+4)).
    #[default]
    Scott,
    /// Isotropic kernel with this standard deviation.
    #[serde(untagged)]
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeParams {
    #[serde(default)]
    pub bandwidth: KdeBandwidth,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub density_floor: f64,
}

fn default_mc_samples() -> usize {
    10_000
}

fn default_floor() -> f64 {
    1e-12
}

impl Default for KdeParams {
    fn default() -> Self {
        KdeParams {
            bandwidth: KdeBandwidth::Scott,
            mc_samples: default_mc_samples(),
            seed: 0,
            density_floor: default_floor(),
        }
    }
}

/// Gaussian KDE with a full bandwidth matrix.
///
/// Training rows are stored in canonical (sorted) order, so a fitted
/// density is bit-identical whatever order its data arrived in.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    dim: usize,
    data: Vec<Vec<f64>>,
    /// Rows whitened by the inverse Cholesky factor of the bandwidth matrix.
    whitened: Vec<Vec<f64>>,
    chol_lower: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianKde {
    pub fn fit(points: &[Vec<f64>], bandwidth: KdeBandwidth) -> Result<Self> {
        let n = points.len();
        let dim = points.first().map_or(0, Vec::len);
        if n < 2 {
            return Err(Error::TooFew {
                what: "kernel density estimate",
                needed: 2,
                got: n,
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("KDE points have no coordinates".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(dim, p.len()));
        }
        let mut data = points.to_vec();
        data.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let h = match bandwidth {
            KdeBandwidth::Scott => {
                let m = EmbeddingMatrix::from_rows(&data, "kde")?;
                let (_, cov) = linalg::mean_and_covariance(&m)?;
                let factor = (n as f64).powf(-2.0 / (dim as f64 + 4.0));
                cov * factor
            }
            KdeBandwidth::Fixed(s) if s > 0.0 && s.is_finite() => DMatrix::identity(dim, dim) * (s * s),
            KdeBandwidth::Fixed(s) => {
                return Err(Error::InvalidParameter(format!("KDE bandwidth must be positive, got {s}")))
            }
        };
        let chol = Cholesky::new(h).ok_or_else(|| {
            Error::Numerical(
                "KDE bandwidth matrix is singular (a property is constant or collinear); use a fixed bandwidth"
                    .into(),
            )
        })?;
        let chol_lower = chol.l();
        let log_det: f64 = 2.0 * chol_lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det) - (n as f64).ln();
        let whitened = data.iter().map(|p| whiten(&chol_lower, p)).collect();
        Ok(GaussianKde {
            dim,
            data,
            whitened,
            chol_lower,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let z = whiten(&self.chol_lower, x);
        let exps: Vec<f64> = self
            .whitened
            .iter()
            .map(|w| -0.5 * linalg::squared_distance(&z, w))
            .collect();
        let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = exps.iter().map(|e| (e - max).exp()).sum();
        self.log_norm + max + s.ln()
    }

    /// Draws one point: a uniformly chosen training row plus kernel noise.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let i = rng.random_range(0..self.data.len());
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        let noise = &self.chol_lower * z;
        self.data[i].iter().zip(noise.iter()).map(|(a, b)| a + b).collect()
    }
}

fn whiten(lower: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    // forward substitution: L z = x
    let d = x.len();
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = x[i];
        for j in 0..i {
            s -= lower[(i, j)] * z[j];
        }
        z[i] = s / lower[(i, i)];
    }
    z
}

const MC_CHUNK: usize = 1024;

/// Monte-Carlo estimate of KL(p_G ‖ p_R) between Gaussian KDEs fitted to
/// the two point sets, sampling from p_G. Densities are floored at
/// `density_floor` before taking logs.
pub fn kl_divergence_continuous(generated: &[Vec<f64>], reference: &[Vec<f64>], params: KdeParams) -> Result<f64> {
    if params.mc_samples == 0 {
        return Err(Error::InvalidParameter("mc_samples must be positive".into()));
    }
    if params.density_floor.is_nan() || params.density_floor <= 0.0 {
        return Err(Error::InvalidParameter("density floor must be positive".into()));
    }
    let p_g = GaussianKde::fit(generated, params.bandwidth)?;
    let p_r = GaussianKde::fit(reference, params.bandwidth)?;
    if p_g.dim() != p_r.dim() {
        return Err(Error::DimensionMismatch(p_g.dim(), p_r.dim()));
    }
    let log_floor = params.density_floor.ln();
    let chunks = params.mc_samples.div_ceil(MC_CHUNK);
    let partial = par::map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(c as u64);
        let count = MC_CHUNK.min(params.mc_samples - c * MC_CHUNK);
        (0..count)
            .map(|_| {
                let s = p_g.sample(&mut rng);
                p_g.log_density(&s).max(log_floor) - p_r.log_density(&s).max(log_floor)
            })
            .sum::<f64>()
    });
    Ok(partial.into_iter().sum::<f64>() / params.mc_samples as f64)
}

/// Exact KL divergence between the empirical category frequencies, each
/// smoothed as (f + ε) / (1 + ε·C) over the union of C observed categories.
pub fn kl_divergence_categorical<S: AsRef<str>>(generated: &[S], reference: &[S], epsilon: f64) -> Result<f64> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Empty("categorical KL needs both sets"));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter("smoothing ε must be positive".into()));
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for g in generated {
        counts.entry(g.as_ref()).or_default().0 += 1;
    }
    for r in reference {
        counts.entry(r.as_ref()).or_default().1 += 1;
    }
    let c = counts.len() as f64;
    let (ng, nr) = (generated.len() as f64, reference.len() as f64);
    let kl = counts
        .values()
        .map(|&(g, r)| {
            let p = (g as f64 / ng + epsilon) / (1.0 + epsilon * c);
            let q = (r as f64 / nr + epsilon) / (1.0 + epsilon * c);
            p * (p / q).ln()
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}
