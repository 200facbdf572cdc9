//! The built-in metric catalog: each [`MetricKind`] wraps one metric
//! function behind the engine's [`Metric`] trait.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{PropertyColumn, SequenceSet};
use crate::embed_metrics::{self, Bandwidth, FkeaParams, KernelSpec};
use crate::engine::{Direction, Metric, MetricValue, Sample};
use crate::error::{Error, Result};
use crate::prop_metrics::{self, ConformityParams, KdeBandwidth, KdeLogLikelihood, KdeParams, Side};
use crate::seq_metrics::{self, DiversityK, DiversityParams, NgramParams};

fn default_k() -> usize {
    3
}

fn default_fkea_features() -> usize {
    FkeaParams::default().num_features
}

fn default_alpha() -> f64 {
    1.0
}

fn default_folds() -> usize {
    1
}

fn default_mc_samples() -> usize {
    KdeParams::default().mc_samples
}

fn default_floor() -> f64 {
    KdeParams::default().density_floor
}

/// A built-in metric and its parameters. Seeds left unset fall back to the
/// run seed given to [`StandardMetric::with_seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricKind {
    Novelty,
    Uniqueness,
    Diversity {
        #[serde(default)]
        k: DiversityK,
        #[serde(default)]
        seed: Option<u64>,
    },
    NgramJaccard {
        n: usize,
    },
    Fbd {
        representation: String,
    },
    Mmd {
        representation: String,
        #[serde(default)]
        kernel: KernelSpec,
    },
    Precision {
        representation: String,
        #[serde(default = "default_k")]
        k: usize,
    },
    Recall {
        representation: String,
        #[serde(default = "default_k")]
        k: usize,
    },
    Authenticity {
        representation: String,
    },
    Vendi {
        representation: String,
        #[serde(default)]
        kernel: KernelSpec,
    },
    FkeaVendi {
        representation: String,
        #[serde(default = "default_fkea_features")]
        num_features: usize,
        #[serde(default = "default_alpha")]
        renyi_alpha: f64,
        #[serde(default)]
        sigma: Bandwidth,
        #[serde(default)]
        seed: Option<u64>,
    },
    Identity {
        representation: String,
        column: String,
    },
    Threshold {
        representation: String,
        column: String,
        threshold: f64,
        #[serde(default)]
        side: Side,
    },
    HitRate {
        representation: String,
        column: String,
    },
    Hypervolume {
        representation: String,
        columns: Vec<String>,
        #[serde(default)]
        reference_point: Option<Vec<f64>>,
    },
    HullVolume {
        representation: String,
        columns: Vec<String>,
    },
    Conformity {
        representation: String,
        columns: Vec<String>,
        #[serde(default = "default_folds")]
        folds: usize,
        #[serde(default)]
        bandwidth: KdeBandwidth,
        #[serde(default)]
        seed: Option<u64>,
    },
    KlDivergence {
        representation: String,
        columns: Vec<String>,
        #[serde(default)]
        bandwidth: KdeBandwidth,
        #[serde(default = "default_mc_samples")]
        mc_samples: usize,
        #[serde(default = "default_floor")]
        density_floor: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl MetricKind {
    pub fn default_name(&self) -> String {
        match self {
            MetricKind::Novelty => "Novelty".into(),
            MetricKind::Uniqueness => "Uniqueness".into(),
            MetricKind::Diversity { .. } => "Diversity".into(),
            MetricKind::NgramJaccard { n } => format!("Jaccard-{n}"),
            MetricKind::Fbd { .. } => "FBD".into(),
            MetricKind::Mmd { .. } => "MMD".into(),
            MetricKind::Precision { .. } => "Precision".into(),
            MetricKind::Recall { .. } => "Recall".into(),
            MetricKind::Authenticity { .. } => "Authenticity".into(),
            MetricKind::Vendi { .. } => "Vendi".into(),
            MetricKind::FkeaVendi { .. } => "FKEA-Vendi".into(),
            MetricKind::Identity { column, .. } => format!("Identity({column})"),
            MetricKind::Threshold { column, .. } => format!("Threshold({column})"),
            MetricKind::HitRate { column, .. } => format!("Hit-rate({column})"),
            MetricKind::Hypervolume { .. } => "Hypervolume".into(),
            MetricKind::HullVolume { .. } => "Hull volume".into(),
            MetricKind::Conformity { .. } => "Conformity".into(),
            MetricKind::KlDivergence { .. } => "KL".into(),
        }
    }

    pub fn default_direction(&self) -> Direction {
        match self {
            MetricKind::Fbd { .. } | MetricKind::Mmd { .. } | MetricKind::KlDivergence { .. } => {
                Direction::Minimize
            }
            _ => Direction::Maximize,
        }
    }

    /// True for metrics that compare against a reference set.
    pub fn needs_reference(&self) -> bool {
        matches!(
            self,
            MetricKind::Novelty
                | MetricKind::NgramJaccard { .. }
                | MetricKind::Fbd { .. }
                | MetricKind::Mmd { .. }
                | MetricKind::Precision { .. }
                | MetricKind::Recall { .. }
                | MetricKind::Authenticity { .. }
                | MetricKind::Conformity { .. }
                | MetricKind::KlDivergence { .. }
        )
    }

    pub fn representation(&self) -> Option<&str> {
        match self {
            MetricKind::Novelty
            | MetricKind::Uniqueness
            | MetricKind::Diversity { .. }
            | MetricKind::NgramJaccard { .. } => None,
            MetricKind::Fbd { representation }
            | MetricKind::Mmd { representation, .. }
            | MetricKind::Precision { representation, .. }
            | MetricKind::Recall { representation, .. }
            | MetricKind::Authenticity { representation }
            | MetricKind::Vendi { representation, .. }
            | MetricKind::FkeaVendi { representation, .. }
            | MetricKind::Identity { representation, .. }
            | MetricKind::Threshold { representation, .. }
            | MetricKind::HitRate { representation, .. }
            | MetricKind::Hypervolume { representation, .. }
            | MetricKind::HullVolume { representation, .. }
            | MetricKind::Conformity { representation, .. }
            | MetricKind::KlDivergence { representation, .. } => Some(representation),
        }
    }

    /// True when the representation is read as a property table.
    pub fn uses_properties(&self) -> bool {
        matches!(
            self,
            MetricKind::Identity { .. }
                | MetricKind::Threshold { .. }
                | MetricKind::HitRate { .. }
                | MetricKind::Hypervolume { .. }
                | MetricKind::HullVolume { .. }
                | MetricKind::Conformity { .. }
                | MetricKind::KlDivergence { .. }
        )
    }
}

/// A catalog metric with its display name, direction and reference set.
#[derive(Debug, Clone)]
pub struct StandardMetric {
    name: String,
    direction: Direction,
    kind: MetricKind,
    reference: Option<Arc<SequenceSet>>,
    seed: u64,
}

impl StandardMetric {
    pub fn new(kind: MetricKind) -> Self {
        StandardMetric {
            name: kind.default_name(),
            direction: kind.default_direction(),
            kind,
            reference: None,
            seed: 0,
        }
    }

    pub fn with_reference(mut self, reference: Arc<SequenceSet>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Seed used wherever the kind leaves its own seed unset.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    fn reference(&self) -> Result<&SequenceSet> {
        self.reference
            .as_deref()
            .ok_or_else(|| Error::Config(format!("metric `{}` needs a reference set", self.name)))
    }
}

fn scalar(v: Result<f64>) -> Result<MetricValue> {
    v.map(MetricValue::scalar)
}

impl Metric for StandardMetric {
    fn name(&self) -> &str {
        &self.name
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn required_representations(&self) -> Vec<String> {
        self.kind.representation().map(str::to_string).into_iter().collect()
    }

    fn compute(&self, sample: &Sample<'_>) -> Result<MetricValue> {
        let seed = |s: &Option<u64>| s.unwrap_or(self.seed);
        let embeddings = |repr: &str| -> Result<_> {
            let r = self.reference()?;
            Ok((sample.embeddings(repr)?, sample.with_set(r).embeddings(repr)?))
        };
        let property_rows = |repr: &str, columns: &[String]| -> Result<_> {
            let r = self.reference()?;
            Ok((
                sample.properties(repr)?.numeric_rows(columns)?,
                sample.with_set(r).properties(repr)?.numeric_rows(columns)?,
            ))
        };
        match &self.kind {
            MetricKind::Novelty => scalar(seq_metrics::novelty(&sample.sequences(), self.reference()?.sequences())),
            MetricKind::Uniqueness => scalar(seq_metrics::uniqueness(&sample.sequences())),
            MetricKind::Diversity { k, seed: s } => scalar(seq_metrics::diversity(
                &sample.sequences(),
                DiversityParams { k: *k, seed: seed(s) },
            )),
            MetricKind::NgramJaccard { n } => scalar(seq_metrics::ngram_jaccard(
                &sample.sequences(),
                self.reference()?.sequences(),
                NgramParams { n: *n },
            )),
            MetricKind::Fbd { representation } => {
                let (g, r) = embeddings(representation)?;
                scalar(embed_metrics::fbd(&g, &r))
            }
            MetricKind::Mmd { representation, kernel } => {
                let (g, r) = embeddings(representation)?;
                scalar(embed_metrics::mmd(&g, &r, *kernel))
            }
            MetricKind::Precision { representation, k } => {
                let (g, r) = embeddings(representation)?;
                scalar(embed_metrics::improved_precision(&g, &r, *k))
            }
            MetricKind::Recall { representation, k } => {
                let (g, r) = embeddings(representation)?;
                scalar(embed_metrics::improved_recall(&g, &r, *k))
            }
            MetricKind::Authenticity { representation } => {
                let (g, r) = embeddings(representation)?;
                scalar(embed_metrics::authenticity(&g, &r))
            }
            MetricKind::Vendi { representation, kernel } => {
                scalar(embed_metrics::vendi_exact(&*sample.embeddings(representation)?, *kernel))
            }
            MetricKind::FkeaVendi {
                representation,
                num_features,
                renyi_alpha,
                sigma,
                seed: s,
            } => scalar(embed_metrics::vendi_fkea(
                &*sample.embeddings(representation)?,
                FkeaParams {
                    num_features: *num_features,
                    renyi_alpha: *renyi_alpha,
                    seed: seed(s),
                    sigma: *sigma,
                },
            )),
            MetricKind::Identity { representation, column } => {
                let (mean, var) = prop_metrics::identity_stat(&sample.properties(representation)?.real(column)?)?;
                Ok(MetricValue::with_deviation(mean, var.sqrt()))
            }
            MetricKind::Threshold {
                representation,
                column,
                threshold,
                side,
            } => scalar(prop_metrics::threshold_fraction(
                &sample.properties(representation)?.real(column)?,
                *threshold,
                *side,
            )),
            MetricKind::HitRate { representation, column } => {
                scalar(prop_metrics::hit_rate(&sample.properties(representation)?.real(column)?))
            }
            MetricKind::Hypervolume {
                representation,
                columns,
                reference_point,
            } => {
                let points = sample.properties(representation)?.numeric_rows(columns)?;
                scalar(prop_metrics::hypervolume_indicator(&points, reference_point.as_deref()))
            }
            MetricKind::HullVolume { representation, columns } => {
                let points = sample.properties(representation)?.numeric_rows(columns)?;
                prop_metrics::convex_hull_volume(&points).map(|h| MetricValue::scalar(h.volume))
            }
            MetricKind::Conformity {
                representation,
                columns,
                folds,
                bandwidth,
                seed: s,
            } => {
                let (g, r) = property_rows(representation, columns)?;
                scalar(prop_metrics::conformity_score(
                    &g,
                    &r,
                    &KdeLogLikelihood { bandwidth: *bandwidth },
                    ConformityParams {
                        folds: *folds,
                        seed: seed(s),
                    },
                ))
            }
            MetricKind::KlDivergence {
                representation,
                columns,
                bandwidth,
                mc_samples,
                density_floor,
                seed: s,
            } => {
                let reference = self.reference()?;
                let g = sample.properties(representation)?;
                if let [only] = columns.as_slice() {
                    if let PropertyColumn::Categorical(_) = g.column(only)? {
                        let r = sample.with_set(reference).properties(representation)?;
                        return scalar(prop_metrics::kl_divergence_categorical(
                            &g.categorical(only)?,
                            &r.categorical(only)?,
                            *density_floor,
                        ));
                    }
                }
                let (g, r) = property_rows(representation, columns)?;
                scalar(prop_metrics::kl_divergence_continuous(
                    &g,
                    &r,
                    KdeParams {
                        bandwidth: *bandwidth,
                        mc_samples: *mc_samples,
                        seed: seed(s),
                        density_floor: *density_floor,
                    },
                ))
            }
        }
    }
}
