//! Metrics on fixed-size embeddings: Fréchet distance, unbiased MMD,
//! improved precision/recall, authenticity and the Vendi family.

use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, squared_distance};
use crate::neighbors::{self, Strategy};
use crate::par;

/// Kernel bandwidth: a fixed value or the median pairwise distance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    #[default]
    MedianHeuristic,
    #[serde(untagged)]
    Fixed(f64),
}

impl Bandwidth {
    /// Resolves the bandwidth against the pooled point sets.
    pub fn resolve(self, sets: &[&EmbeddingMatrix]) -> Result<f64> {
        match self {
            Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
            Bandwidth::Fixed(s) => Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {s}"
            ))),
            Bandwidth::MedianHeuristic => linalg::median_heuristic(sets),
        }
    }
}

/// Positive-definite kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// exp(−‖x−y‖² / 2σ²)
    GaussianRbf {
        #[serde(default)]
        sigma: Bandwidth,
    },
    /// (1 + ‖x−y‖² / 2α)^(−α)
    RationalQuadratic {
        #[serde(default = "default_rq_alpha")]
        alpha: f64,
    },
}

fn default_rq_alpha() -> f64 {
    1.0
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::GaussianRbf {
            sigma: Bandwidth::MedianHeuristic,
        }
    }
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Self {
        KernelSpec::GaussianRbf {
            sigma: Bandwidth::Fixed(sigma),
        }
    }

    pub fn resolve(self, sets: &[&EmbeddingMatrix]) -> Result<Kernel> {
        match self {
            KernelSpec::GaussianRbf { sigma } => Ok(Kernel::GaussianRbf {
                sigma: sigma.resolve(sets)?,
            }),
            KernelSpec::RationalQuadratic { alpha } if alpha > 0.0 && alpha.is_finite() => {
                Ok(Kernel::RationalQuadratic { alpha })
            }
            KernelSpec::RationalQuadratic { alpha } => Err(Error::InvalidParameter(format!(
                "rational-quadratic alpha must be positive, got {alpha}"
            ))),
        }
    }
}

/// A kernel with all parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    GaussianRbf { sigma: f64 },
    RationalQuadratic { alpha: f64 },
}

impl Kernel {
    #[inline]
    pub fn from_sq_dist(&self, sq: f64) -> f64 {
        match *self {
            Kernel::GaussianRbf { sigma } => (-sq / (2.0 * sigma * sigma)).exp(),
            Kernel::RationalQuadratic { alpha } => (1.0 + sq / (2.0 * alpha)).powf(-alpha),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.from_sq_dist(squared_distance(a, b))
    }
}

fn same_dim(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

fn at_least(x: &EmbeddingMatrix, what: &'static str, needed: usize) -> Result<()> {
    if x.rows() < needed {
        return Err(Error::TooFew {
            what,
            needed,
            got: x.rows(),
        });
    }
    Ok(())
}

/// Fréchet distance between Gaussians fitted to the two embedding sets.
///
/// Covariances use the (n − 1) estimator. The trace of (Σ_G Σ_R)^½ is taken
/// from the symmetric form (√Σ_G Σ_R √Σ_G)^½, which has the same
/// eigenvalues; a negative total from rounding is clamped to 0.
pub fn fbd(generated: &EmbeddingMatrix, reference: &EmbeddingMatrix) -> Result<f64> {
    same_dim(generated, reference)?;
    at_least(generated, "FBD generated set", 2)?;
    at_least(reference, "FBD reference set", 2)?;
    if generated.rows() < generated.dim() || reference.rows() < reference.dim() {
        warn!(
            "FBD with fewer samples ({} / {}) than dimensions ({}): covariance is singular",
            generated.rows(),
            reference.rows(),
            generated.dim()
        );
    }
    let (mu_g, cov_g) = linalg::mean_and_covariance(generated)?;
    let (mu_r, cov_r) = linalg::mean_and_covariance(reference)?;
    let mean_term = (&mu_g - &mu_r).norm_squared();
    let cross = sqrt_product_trace(&cov_g, &cov_r)?;
    let value = mean_term + cov_g.trace() + cov_r.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// Tr((A B)^½) for symmetric PSD `a`, `b`, via the symmetric conjugated form.
pub fn sqrt_product_trace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let root_a = linalg::matrix_sqrt_psd(a)?;
    let mut inner = &root_a * b * &root_a;
    linalg::symmetrize(&mut inner);
    let eig = linalg::clamped_eigenvalues(&inner)?;
    Ok(eig.iter().map(|v| v.sqrt()).sum())
}

/// Unbiased MMD estimate (within-set diagonals excluded). May be negative.
pub fn mmd(generated: &EmbeddingMatrix, reference: &EmbeddingMatrix, kernel: KernelSpec) -> Result<f64> {
    same_dim(generated, reference)?;
    at_least(generated, "MMD generated set", 2)?;
    at_least(reference, "MMD reference set", 2)?;
    let k = kernel.resolve(&[generated, reference])?;
    let (n, m) = (generated.rows() as f64, reference.rows() as f64);
    let within = |x: &EmbeddingMatrix| {
        par::sum_range(x.rows(), |i| {
            let a = x.row(i);
            (0..x.rows())
                .filter(|&j| j != i)
                .map(|j| k.eval(a, x.row(j)))
                .sum::<f64>()
        })
    };
    let kxx = within(generated);
    let kyy = within(reference);
    let kxy = par::sum_range(generated.rows(), |i| {
        let a = generated.row(i);
        reference.iter_rows().map(|b| k.eval(a, b)).sum::<f64>()
    });
    Ok(kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m))
}

/// Fraction of `generated` points lying inside at least one k-NN ball of `reference`.
pub fn improved_precision(generated: &EmbeddingMatrix, reference: &EmbeddingMatrix, k: usize) -> Result<f64> {
    same_dim(generated, reference)?;
    if generated.rows() == 0 {
        return Err(Error::Empty("precision needs generated points"));
    }
    let radii = neighbors::kth_neighbor_sq_distances(reference, k, Strategy::Auto)?;
    let inside = par::map_range(generated.rows(), |i| {
        let x = generated.row(i);
        reference
            .iter_rows()
            .zip(&radii)
            .any(|(y, &r)| squared_distance(x, y) <= r)
    });
    Ok(inside.iter().filter(|&&b| b).count() as f64 / generated.rows() as f64)
}

/// Fraction of `reference` points inside at least one k-NN ball of `generated`.
pub fn improved_recall(generated: &EmbeddingMatrix, reference: &EmbeddingMatrix, k: usize) -> Result<f64> {
    improved_precision(reference, generated, k)
}

/// Fraction of generated points farther from their nearest reference point
/// than that reference point is from its own nearest reference neighbour.
pub fn authenticity(generated: &EmbeddingMatrix, reference: &EmbeddingMatrix) -> Result<f64> {
    same_dim(generated, reference)?;
    at_least(reference, "authenticity reference set", 2)?;
    if generated.rows() == 0 {
        return Err(Error::Empty("authenticity needs generated points"));
    }
    let nearest_other = neighbors::kth_neighbor_sq_distances(reference, 1, Strategy::Auto)?;
    let authentic = par::map_range(generated.rows(), |i| {
        let (j, d) = neighbors::nearest(reference, generated.row(i)).expect("reference is non-empty");
        d > nearest_other[j]
    });
    Ok(authentic.iter().filter(|&&b| b).count() as f64 / generated.rows() as f64)
}

/// Exponential of the Rényi entropy of order `alpha` of a probability vector.
///
/// `alpha == 1` gives the Shannon form; zero entries contribute nothing.
pub fn exp_renyi_entropy(probs: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Rényi order must be positive and finite, got {alpha}"
        )));
    }
    let positive = probs.iter().copied().filter(|&p| p > 0.0);
    if alpha == 1.0 {
        let h: f64 = positive.map(|p| -p * p.ln()).sum();
        Ok(h.exp())
    } else {
        let s: f64 = positive.map(|p| p.powf(alpha)).sum();
        Ok((s.ln() / (1.0 - alpha)).exp())
    }
}

fn normalized_spectrum(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let trace = m.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::Numerical(format!("similarity matrix has trace {trace}")));
    }
    let eig = linalg::clamped_eigenvalues(&(m / trace))?;
    Ok(eig)
}

/// Kernel Gram matrix of the rows.
pub fn gram_matrix(x: &EmbeddingMatrix, kernel: &Kernel) -> DMatrix<f64> {
    let n = x.rows();
    let rows = par::map_range(n, |i| {
        let a = x.row(i);
        (0..n).map(|j| kernel.eval(a, x.row(j))).collect::<Vec<_>>()
    });
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Vendi score from the exact eigen-spectrum of the trace-normalised Gram matrix.
pub fn vendi_exact(x: &EmbeddingMatrix, kernel: KernelSpec) -> Result<f64> {
    at_least(x, "Vendi score", 1)?;
    let k = if x.rows() == 1 {
        // a single point has spectrum {1} for any kernel
        return Ok(1.0);
    } else {
        kernel.resolve(&[x])?
    };
    let gram = gram_matrix(x, &k);
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite kernel value".into()));
    }
    exp_renyi_entropy(&normalized_spectrum(&gram)?, 1.0)
}

/// Parameters of the random-Fourier-feature Vendi approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkeaParams {
    /// Number of frequency vectors m; the feature map has 2m entries.
    pub num_features: usize,
    #[serde(default = "default_renyi_alpha")]
    pub renyi_alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sigma: Bandwidth,
}

fn default_renyi_alpha() -> f64 {
    1.0
}

impl Default for FkeaParams {
    fn default() -> Self {
        FkeaParams {
            num_features: 256,
            renyi_alpha: 1.0,
            seed: 0,
            sigma: Bandwidth::MedianHeuristic,
        }
    }
}

/// Random Fourier feature map φ: ℝ^d → ℝ^{2m} for the Gaussian kernel.
pub struct FourierFeatures {
    /// m × d frequency vectors drawn from N(0, σ⁻² I).
    omega: DMatrix<f64>,
}

impl FourierFeatures {
    pub fn sample(dim: usize, num_features: usize, sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = DMatrix::from_fn(num_features, dim, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z / sigma
        });
        FourierFeatures { omega }
    }

    pub fn num_features(&self) -> usize {
        self.omega.nrows()
    }

    /// n × 2m feature matrix with rows [cos⟨ω₁,z⟩, sin⟨ω₁,z⟩, …] / √m.
    pub fn transform(&self, x: &EmbeddingMatrix) -> DMatrix<f64> {
        let m = self.num_features();
        let scale = (1.0 / m as f64).sqrt();
        let rows = par::map_range(x.rows(), |i| {
            let z = x.row(i);
            let mut out = Vec::with_capacity(2 * m);
            for j in 0..m {
                let dot: f64 = (0..z.len()).map(|c| self.omega[(j, c)] * z[c]).sum();
                out.push(scale * dot.cos());
                out.push(scale * dot.sin());
            }
            out
        });
        DMatrix::from_fn(x.rows(), 2 * m, |i, j| rows[i][j])
    }
}

/// Normalised eigenvalues of the 2m × 2m feature covariance φ(z)ᵀφ(z).
pub fn fkea_spectrum(x: &EmbeddingMatrix, params: &FkeaParams) -> Result<Vec<f64>> {
    at_least(x, "FKEA Vendi score", 1)?;
    if params.num_features == 0 {
        return Err(Error::InvalidParameter("FKEA needs at least one feature".into()));
    }
    let sigma = match (params.sigma, x.rows()) {
        (Bandwidth::MedianHeuristic, 1) => 1.0,
        (b, _) => b.resolve(&[x])?,
    };
    let features = FourierFeatures::sample(x.dim(), params.num_features, sigma, params.seed);
    let phi = features.transform(x);
    let width = phi.ncols();
    // φᵀφ and φφᵀ share their nonzero eigenvalues; decompose the smaller one
    let mut gram = if width <= phi.nrows() {
        phi.transpose() * &phi
    } else {
        &phi * phi.transpose()
    };
    linalg::symmetrize(&mut gram);
    let mut spectrum = normalized_spectrum(&gram)?;
    spectrum.resize(width, 0.0);
    Ok(spectrum)
}

/// Fourier-feature approximation of the Vendi score with Rényi order α.
pub fn vendi_fkea(x: &EmbeddingMatrix, params: FkeaParams) -> Result<f64> {
    if !(params.renyi_alpha > 0.0 && params.renyi_alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Rényi order must be positive, got {}",
            params.renyi_alpha
        )));
    }
    let spectrum = fkea_spectrum(x, &params)?;
    exp_renyi_entropy(&spectrum, params.renyi_alpha)
}
