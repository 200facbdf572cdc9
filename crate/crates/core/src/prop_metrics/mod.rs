//! Metrics over per-sequence properties.

mod conformity;
mod hull;
mod hypervolume;
mod kde;

pub use conformity::{
    conformity_score, conformity_score_from_scores, ConformityMeasure, ConformityParams, KdeLogLikelihood,
};
pub use hull::{convex_hull_volume, HullVolume};
pub use hypervolume::hypervolume_indicator;
pub use kde::{kl_divergence_categorical, kl_divergence_continuous, GaussianKde, KdeBandwidth, KdeParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population mean and population variance (1/n normalisation).
pub fn identity_stat(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("identity needs at least one value"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Above,
    Below,
}

/// Fraction of values strictly above (or strictly below) `c`.
pub fn threshold_fraction(values: &[f64], c: f64, side: Side) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("threshold needs at least one value"));
    }
    let hits = values
        .iter()
        .filter(|&&v| match side {
            Side::Above => v > c,
            Side::Below => v < c,
        })
        .count();
    Ok(hits as f64 / values.len() as f64)
}

/// Mean of a 0/1 label column.
pub fn hit_rate(labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("hit-rate needs at least one label"));
    }
    if let Some(i) = labels.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hit-rate label at row {i} is {}, expected 0 or 1",
            labels[i]
        )));
    }
    Ok(labels.iter().sum::<f64>() / labels.len() as f64)
}
