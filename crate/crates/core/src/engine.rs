//! Evaluation engine: the metric contract, group × metric tables, fold
//! resampling and iteration trajectories.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingMatrix, PropertyTable, SequenceSet};
use crate::error::{Error, Result};
use crate::par;

/// Whether larger or smaller values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Maximize => "↑",
            Direction::Minimize => "↓",
        }
    }
}

/// A metric value, optionally with a deviation and per-fold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_fold: Option<Vec<f64>>,
}

impl MetricValue {
    pub fn scalar(value: f64) -> Self {
        MetricValue {
            value,
            deviation: None,
            per_fold: None,
        }
    }

    pub fn with_deviation(value: f64, deviation: f64) -> Self {
        MetricValue {
            value,
            deviation: Some(deviation),
            per_fold: None,
        }
    }

    /// Mean and sample standard deviation of per-fold values.
    pub fn from_folds(per_fold: Vec<f64>) -> Result<Self> {
        if per_fold.len() < 2 {
            return Err(Error::TooFew {
                what: "fold summary",
                needed: 2,
                got: per_fold.len(),
            });
        }
        let k = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / k;
        let var = per_fold.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Ok(MetricValue {
            value: mean,
            deviation: Some(var.sqrt()),
            per_fold: Some(per_fold),
        })
    }
}

/// Outcome of one (group, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellResult {
    Ok(MetricValue),
    Error { message: String },
}

impl CellResult {
    pub fn value(&self) -> Option<&MetricValue> {
        match self {
            CellResult::Ok(v) => Some(v),
            CellResult::Error { .. } => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, CellResult::Error { .. })
    }
}

/// Supplies representations for a named sequence set.
pub trait Resolver: Send + Sync {
    fn embeddings(&self, set: &SequenceSet, representation: &str) -> Result<Arc<EmbeddingMatrix>>;
    fn properties(&self, set: &SequenceSet, representation: &str) -> Result<Arc<PropertyTable>>;
}

/// A resolver with no representations; string-only metrics need nothing more.
pub struct NoRepresentations;

impl Resolver for NoRepresentations {
    fn embeddings(&self, set: &SequenceSet, representation: &str) -> Result<Arc<EmbeddingMatrix>> {
        Err(Error::MissingRepresentation(representation.into(), set.name().into()))
    }

    fn properties(&self, set: &SequenceSet, representation: &str) -> Result<Arc<PropertyTable>> {
        Err(Error::MissingRepresentation(representation.into(), set.name().into()))
    }
}

/// A view of a sequence set (possibly a row subset) plus its representations.
#[derive(Clone)]
pub struct Sample<'a> {
    set: &'a SequenceSet,
    rows: Option<Arc<[usize]>>,
    resolver: &'a dyn Resolver,
}

impl<'a> Sample<'a> {
    pub fn new(set: &'a SequenceSet, resolver: &'a dyn Resolver) -> Self {
        Sample {
            set,
            rows: None,
            resolver,
        }
    }

    /// The underlying set, ignoring any row subset.
    pub fn set(&self) -> &'a SequenceSet {
        self.set
    }

    pub fn resolver(&self) -> &'a dyn Resolver {
        self.resolver
    }

    pub fn len(&self) -> usize {
        self.rows.as_ref().map_or(self.set.len(), |r| r.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row indices into the underlying set, in view order.
    pub fn indices(&self) -> Vec<usize> {
        match &self.rows {
            Some(r) => r.to_vec(),
            None => (0..self.set.len()).collect(),
        }
    }

    pub fn sequences(&self) -> Vec<&'a str> {
        let all = self.set.sequences();
        match &self.rows {
            Some(r) => r.iter().map(|&i| all[i].as_str()).collect(),
            None => all.iter().map(String::as_str).collect(),
        }
    }

    /// A sub-view; `positions` index into this view.
    pub fn subset(&self, positions: &[usize]) -> Sample<'a> {
        let rows: Vec<usize> = match &self.rows {
            Some(r) => positions.iter().map(|&p| r[p]).collect(),
            None => positions.to_vec(),
        };
        Sample {
            set: self.set,
            rows: Some(rows.into()),
            resolver: self.resolver,
        }
    }

    /// The full view of another set resolved through the same resolver.
    pub fn with_set<'b>(&self, set: &'b SequenceSet) -> Sample<'b>
    where
        'a: 'b,
    {
        Sample::new(set, self.resolver)
    }

    pub fn embeddings(&self, representation: &str) -> Result<Arc<EmbeddingMatrix>> {
        let full = self.resolver.embeddings(self.set, representation)?;
        if full.rows() != self.set.len() {
            return Err(Error::RowMismatch {
                source_id: full.source_id().to_string(),
                expected: self.set.len(),
                got: full.rows(),
            });
        }
        Ok(match &self.rows {
            Some(r) => Arc::new(full.select(r)),
            None => full,
        })
    }

    pub fn properties(&self, representation: &str) -> Result<Arc<PropertyTable>> {
        let full = self.resolver.properties(self.set, representation)?;
        if full.rows() != self.set.len() {
            return Err(Error::RowMismatch {
                source_id: full.source_id().to_string(),
                expected: self.set.len(),
                got: full.rows(),
            });
        }
        Ok(match &self.rows {
            Some(r) => Arc::new(full.select(r)),
            None => full,
        })
    }
}

/// A named metric over a sample of sequences.
pub trait Metric: Send + Sync {
    fn name(&self) -> &str;
    fn direction(&self) -> Direction;
    fn required_representations(&self) -> Vec<String> {
        Vec::new()
    }
    fn compute(&self, sample: &Sample<'_>) -> Result<MetricValue>;
}

/// Column header of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricHeader {
    pub name: String,
    pub direction: Direction,
}

/// Groups × metrics table of results, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub groups: Vec<String>,
    pub metrics: Vec<MetricHeader>,
    /// `cells[g][m]`.
    pub cells: Vec<Vec<CellResult>>,
}

impl ReportTable {
    pub fn cell(&self, group: &str, metric: &str) -> Option<&CellResult> {
        let g = self.groups.iter().position(|x| x == group)?;
        let m = self.metrics.iter().position(|x| x.name == metric)?;
        Some(&self.cells[g][m])
    }

    pub fn error_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_error()).count()
    }
}

fn check_names(groups: &[SequenceSet], metrics: &[Arc<dyn Metric>]) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::Config("no groups to evaluate".into()));
    }
    if metrics.is_empty() {
        return Err(Error::Config("no metrics to evaluate".into()));
    }
    let mut seen = HashSet::new();
    for g in groups {
        if !seen.insert(g.name()) {
            return Err(Error::Config(format!("duplicate group name `{}`", g.name())));
        }
    }
    let mut seen = HashSet::new();
    for m in metrics {
        if !seen.insert(m.name()) {
            return Err(Error::Config(format!("duplicate metric name `{}`", m.name())));
        }
    }
    Ok(())
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

fn compute_cell(metric: &dyn Metric, sample: &Sample<'_>) -> CellResult {
    match catch_unwind(AssertUnwindSafe(|| metric.compute(sample))) {
        Ok(Ok(v)) if v.value.is_finite() => CellResult::Ok(v),
        Ok(Ok(v)) => CellResult::Error {
            message: format!("non-finite result {}", v.value),
        },
        Ok(Err(e)) => CellResult::Error { message: e.to_string() },
        Err(payload) => CellResult::Error {
            message: format!("metric panicked: {}", panic_message(payload)),
        },
    }
}

/// Computes every metric on every group. Cells run in parallel; a failing
/// cell becomes an error entry without affecting the others.
pub fn evaluate(
    groups: &[SequenceSet],
    metrics: &[Arc<dyn Metric>],
    resolver: &dyn Resolver,
) -> Result<ReportTable> {
    check_names(groups, metrics)?;
    let m = metrics.len();
    let flat = par::map_range(groups.len() * m, |c| {
        let sample = Sample::new(&groups[c / m], resolver);
        compute_cell(metrics[c % m].as_ref(), &sample)
    });
    let mut cells = Vec::with_capacity(groups.len());
    let mut it = flat.into_iter();
    for _ in groups {
        cells.push(it.by_ref().take(m).collect());
    }
    Ok(ReportTable {
        groups: groups.iter().map(|g| g.name().to_string()).collect(),
        metrics: metrics
            .iter()
            .map(|x| MetricHeader {
                name: x.name().to_string(),
                direction: x.direction(),
            })
            .collect(),
        cells,
    })
}

/// Seeded shuffle of `0..n` cut into `k` folds of `n / k` elements; the
/// trailing `n % k` shuffled elements are dropped.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::TooFew {
            what: "fold resampling",
            needed: k,
            got: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let size = n / k;
    Ok(order.chunks_exact(size).take(k).map(<[usize]>::to_vec).collect())
}

/// A metric evaluated on `k` disjoint equal-size folds.
pub struct Folded {
    inner: Arc<dyn Metric>,
    folds: usize,
    seed: u64,
}

impl Folded {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn inner(&self) -> &Arc<dyn Metric> {
        &self.inner
    }
}

impl Metric for Folded {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn direction(&self) -> Direction {
        self.inner.direction()
    }

    fn required_representations(&self) -> Vec<String> {
        self.inner.required_representations()
    }

    fn compute(&self, sample: &Sample<'_>) -> Result<MetricValue> {
        let folds = fold_partition(sample.len(), self.folds, self.seed)?;
        let values = folds
            .iter()
            .map(|f| self.inner.compute(&sample.subset(f)).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        MetricValue::from_folds(values)
    }
}

/// Wraps `metric` so it reports the mean and sample deviation over `k` folds.
pub fn fold_wrap(metric: Arc<dyn Metric>, k: usize, seed: u64) -> Result<Arc<dyn Metric>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    Ok(Arc::new(Folded {
        inner: metric,
        folds: k,
        seed,
    }))
}

/// One round of an iterative design run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: u64,
    pub groups: Vec<SequenceSet>,
}

/// Iterations with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSeries {
    iterations: Vec<Iteration>,
}

impl IterationSeries {
    pub fn new(iterations: Vec<Iteration>) -> Result<Self> {
        if iterations.is_empty() {
            return Err(Error::Config("iteration series is empty".into()));
        }
        for w in iterations.windows(2) {
            if w[1].index <= w[0].index {
                return Err(Error::Config(format!(
                    "iteration indices must be strictly increasing: {} follows {}",
                    w[1].index, w[0].index
                )));
            }
        }
        Ok(IterationSeries { iterations })
    }

    pub fn iterations(&self) -> &[Iteration] {
        &self.iterations
    }
}

/// Report tables indexed by iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iterations: Vec<u64>,
    pub tables: Vec<ReportTable>,
}

impl Trajectory {
    /// `(iteration, value)` for one group and metric; error cells are skipped.
    pub fn series(&self, group: &str, metric: &str) -> Vec<(u64, f64)> {
        self.iterations
            .iter()
            .zip(&self.tables)
            .filter_map(|(&i, t)| Some((i, t.cell(group, metric)?.value()?.value)))
            .collect()
    }

    pub fn error_count(&self) -> usize {
        self.tables.iter().map(ReportTable::error_count).sum()
    }
}

/// Evaluates every iteration through one resolver, so its caches are shared.
pub fn evaluate_iterations(
    series: &IterationSeries,
    metrics: &[Arc<dyn Metric>],
    resolver: &dyn Resolver,
) -> Result<Trajectory> {
    evaluate_iterations_with(series, metrics, |_| Ok(resolver))
}

/// Like [`evaluate_iterations`] with a per-iteration resolver, for
/// representations that differ between rounds (e.g. per-round files).
pub fn evaluate_iterations_with<'r, F, R>(
    series: &IterationSeries,
    metrics: &[Arc<dyn Metric>],
    mut resolver_for: F,
) -> Result<Trajectory>
where
    F: FnMut(&Iteration) -> Result<R>,
    R: std::ops::Deref<Target = dyn Resolver + 'r>,
{
    let mut tables = Vec::with_capacity(series.iterations.len());
    for it in &series.iterations {
        let resolver = resolver_for(it)?;
        tables.push(evaluate(&it.groups, metrics, &*resolver)?);
    }
    Ok(Trajectory {
        iterations: series.iterations.iter().map(|i| i.index).collect(),
        tables,
    })
}
