//! Conformity score: a rank statistic over generated × reference pairs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kde::{GaussianKde, KdeBandwidth};
use crate::error::{Error, Result};
use crate::seq_metrics::element_seed;

/// A conformity measure fitted on reference data and applied point-wise.
///
/// Implementations must be permutation equivariant: the score of a point
/// may depend on its value and the fitting data, never on positions.
pub trait ConformityMeasure: Send + Sync {
    /// Fits on `train` and returns one score per row of `evaluate`.
    fn scores(&self, train: &[Vec<f64>], evaluate: &[Vec<f64>]) -> Result<Vec<f64>>;
}

/// Log-likelihood under a Gaussian KDE of the training rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KdeLogLikelihood {
    #[serde(default)]
    pub bandwidth: KdeBandwidth,
}

impl ConformityMeasure for KdeLogLikelihood {
    fn scores(&self, train: &[Vec<f64>], evaluate: &[Vec<f64>]) -> Result<Vec<f64>> {
        let kde = GaussianKde::fit(train, self.bandwidth)?;
        if let Some(p) = evaluate.iter().find(|p| p.len() != kde.dim()) {
            return Err(Error::DimensionMismatch(kde.dim(), p.len()));
        }
        Ok(crate::par::map_slice(evaluate, |p| kde.log_density(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformityParams {
    /// Number of reference folds; 1 scores against the whole reference.
    #[serde(default = "one")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for ConformityParams {
    fn default() -> Self {
        ConformityParams { folds: 1, seed: 0 }
    }
}

/// Fraction of pairs (a, b) ∈ generated × reference scores with a ≥ b.
pub fn conformity_score_from_scores(generated: &[f64], reference: &[f64]) -> Result<f64> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Empty("conformity score needs both sets"));
    }
    if generated.iter().chain(reference).any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN conformity score".into()));
    }
    let mut sorted = reference.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pairs: usize = generated
        .iter()
        .map(|&a| sorted.partition_point(|&b| b <= a))
        .sum();
    Ok(pairs as f64 / (generated.len() * reference.len()) as f64)
}

/// Conformity score of `generated` against `reference` property rows.
///
/// With one fold the measure is fitted on the whole reference and both sets
/// are scored by it. With K > 1 folds, each fold draws a seeded permutation
/// of the reference, fits on the first half and compares the generated
/// scores with the held-out half's; the K fold values are averaged.
pub fn conformity_score(
    generated: &[Vec<f64>],
    reference: &[Vec<f64>],
    measure: &dyn ConformityMeasure,
    params: ConformityParams,
) -> Result<f64> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Empty("conformity score needs both sets"));
    }
    match params.folds {
        0 => Err(Error::InvalidParameter("conformity folds must be at least 1".into())),
        1 => {
            let a = measure.scores(reference, generated)?;
            let b = measure.scores(reference, reference)?;
            conformity_score_from_scores(&a, &b)
        }
        k => {
            let m = reference.len();
            let train_len = m / 2;
            if train_len < 2 || m - train_len < 1 {
                return Err(Error::TooFew {
                    what: "conformity fold (reference rows)",
                    needed: 4,
                    got: m,
                });
            }
            let mut total = 0.0;
            for fold in 0..k {
                let mut order: Vec<usize> = (0..m).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(element_seed(params.seed, fold)));
                let train: Vec<Vec<f64>> = order[..train_len].iter().map(|&i| reference[i].clone()).collect();
                let held: Vec<Vec<f64>> = order[train_len..].iter().map(|&i| reference[i].clone()).collect();
                let a = measure.scores(&train, generated)?;
                let b = measure.scores(&train, &held)?;
                total += conformity_score_from_scores(&a, &b)?;
            }
            Ok(total / k as f64)
        }
    }
}
