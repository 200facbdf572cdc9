//! Evaluation metrics for generative biological sequence design.
//!
//! Sequence sets are scored by metrics over three views of each element:
//! the raw string, a fixed-size embedding and per-sequence properties.
//! [`engine::evaluate`] computes a groups × metrics [`ReportTable`]; the
//! [`report`] module renders it as markdown, CSV, JSON or SVG.
//!
//! ```
//! use std::sync::Arc;
//! use seqeval::{evaluate, Metric, MetricKind, NoRepresentations, SequenceSet, StandardMetric};
//!
//! let groups = [SequenceSet::new("designs", ["GFGD", "GFGD", "IEFFT"]).unwrap()];
//! let metrics: Vec<Arc<dyn Metric>> = vec![Arc::new(StandardMetric::new(MetricKind::Uniqueness))];
//! let table = evaluate(&groups, &metrics, &NoRepresentations).unwrap();
//! assert_eq!(table.cells[0][0].value().unwrap().value, 2.0 / 3.0);
//! ```

pub mod cache;
pub mod data;
pub mod diagnostics;
pub mod embed_metrics;
pub mod engine;
pub mod error;
pub mod hill_climb;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod neighbors;
pub mod par;
pub mod prop_metrics;
pub mod report;
pub mod representations;
pub mod seq_metrics;

pub use cache::Cache;
pub use data::{Alphabet, ColumnType, EmbeddingMatrix, PropertyColumn, PropertyTable, SequenceSet};
pub use engine::{
    evaluate, evaluate_iterations, fold_wrap, CellResult, Direction, Iteration, IterationSeries, Metric, MetricValue,
    NoRepresentations, ReportTable, Resolver, Sample, Trajectory,
};
pub use error::{Error, FormatError, Result};
pub use metrics::{MetricKind, StandardMetric};
pub use representations::{kmer_embed, length_property, KmerSpec, Representations};
