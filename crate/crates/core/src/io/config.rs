//! Declarative run configuration (`config_version: 1`, JSON).
//!
//! Relative paths are resolved against the directory holding the config.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::{Cache, DiskStore};
use crate::data::{Alphabet, SequenceSet};
use crate::engine::{fold_wrap, Direction, Iteration, IterationSeries, Metric, ReportTable, Trajectory};
use crate::error::FormatError;
use crate::io::embeddings::write_file;
use crate::io::sequences::load_sequences;
use crate::metrics::{MetricKind, StandardMetric};
use crate::report::{self, ChartKind, ChartSpec, RenderOptions, TableFormat};
use crate::representations::{KmerEmbedder, KmerMode, KmerSpec, LengthProperty, Representations};

pub const CONFIG_VERSION: u32 = 1;

/// A configuration problem, located by its key path (e.g. `metrics[1].params`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileContent {
    Embeddings,
    Properties,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RepresentationConfig {
    /// Precomputed representations, one file per set name.
    File {
        content: FileContent,
        #[serde(default)]
        paths: IndexMap<String, PathBuf>,
    },
    /// k-mer frequencies over a named alphabet, a symbol string, or an
    /// explicit vocabulary.
    Kmer {
        k: usize,
        #[serde(default)]
        alphabet: Option<Alphabet>,
        #[serde(default)]
        symbols: Option<String>,
        #[serde(default)]
        vocabulary: Option<Vec<String>>,
        #[serde(default)]
        mode: KmerMode,
    },
    Length,
}

impl RepresentationConfig {
    fn content(&self) -> FileContent {
        match self {
            RepresentationConfig::File { content, .. } => *content,
            RepresentationConfig::Kmer { .. } => FileContent::Embeddings,
            RepresentationConfig::Length => FileContent::Properties,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricEntry {
    pub metric: String,
    #[serde(default)]
    pub params: serde_json::Map<String, Value>,
    #[serde(default)]
    pub fold: Option<FoldConfig>,
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Markdown,
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: OutputFormat,
    /// Relative to the output directory.
    pub path: PathBuf,
    #[serde(default)]
    pub chart: Option<ChartSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    pub index: u64,
    pub groups: IndexMap<String, PathBuf>,
    /// Per-round file representations: representation id → set name → path.
    #[serde(default)]
    pub files: IndexMap<String, IndexMap<String, PathBuf>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alphabet: Option<Alphabet>,
    #[serde(default)]
    pub groups: IndexMap<String, PathBuf>,
    /// A group name, or a path to a sequence file.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub representations: IndexMap<String, RepresentationConfig>,
    pub metrics: Vec<MetricEntry>,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    #[serde(default)]
    pub iterations: Vec<IterationConfig>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Run-time overrides that do not belong in the config file.
#[derive(Debug, Clone, Default)]
pub struct PrepareOptions {
    pub seed: Option<u64>,
    /// Persist producer outputs under this directory.
    pub cache_dir: Option<PathBuf>,
}

/// A validated configuration, ready to evaluate.
pub struct Run {
    pub groups: Vec<SequenceSet>,
    pub reference: Option<Arc<SequenceSet>>,
    pub metrics: Vec<Arc<dyn Metric>>,
    pub representations: Representations,
    pub outputs: Vec<OutputSpec>,
}

/// A validated configuration with an iteration manifest.
pub struct IterativeRun {
    pub series: IterationSeries,
    pub metrics: Vec<Arc<dyn Metric>>,
    /// One resolver per iteration; all share the producer caches.
    pub representations: Vec<Representations>,
}

impl IterativeRun {
    pub fn evaluate(&self) -> crate::error::Result<Trajectory> {
        let mut reps = self.representations.iter();
        crate::engine::evaluate_iterations_with(&self.series, &self.metrics, |_| {
            Ok(reps.next().expect("one resolver per iteration") as &dyn crate::engine::Resolver)
        })
    }
}

fn read_set(base: &Path, path: &Path, name: &str, alphabet: Option<Alphabet>, key: &str) -> Result<SequenceSet, ConfigError> {
    let full = base.join(path);
    let set = load_sequences(&full)
        .map_err(|e| ConfigError::new(key, format!("cannot load {}: {e}", full.display())))?
        .renamed(name);
    if set.iter().any(str::is_empty) {
        return Err(ConfigError::new(key, format!("{} contains an empty sequence", full.display())));
    }
    match alphabet {
        Some(a) => set
            .with_alphabet(a)
            .map_err(|e| ConfigError::new(key, format!("{}: {e}", full.display()))),
        None => Ok(set),
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(ConfigError::new(
                "config_version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", cfg.config_version),
            ));
        }
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    fn load_reference(&self, group_sets: &[SequenceSet]) -> Result<Option<Arc<SequenceSet>>, ConfigError> {
        let Some(r) = &self.reference else {
            return Ok(None);
        };
        if let Some(g) = group_sets.iter().find(|g| g.name() == r) {
            return Ok(Some(Arc::new(g.clone())));
        }
        if let Some(path) = self.groups.get(r) {
            return read_set(&self.base_dir, path, r, self.alphabet, "reference").map(|s| Some(Arc::new(s)));
        }
        let path = Path::new(r);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| r.clone());
        read_set(&self.base_dir, path, &name, self.alphabet, "reference").map(|s| Some(Arc::new(s)))
    }

    fn base_representations(&self, opts: &PrepareOptions) -> Result<Representations, ConfigError> {
        let embedding_cache = match &opts.cache_dir {
            Some(dir) => Cache::with_backing(Arc::new(DiskStore::new(dir))),
            None => Cache::new(),
        };
        let mut reps = Representations::with_caches(Some(Arc::new(embedding_cache)), Some(Arc::new(Cache::new())));
        for (id, rc) in &self.representations {
            let key = format!("representations.{id}");
            match rc {
                RepresentationConfig::Kmer {
                    k,
                    alphabet,
                    symbols,
                    vocabulary,
                    mode,
                } => {
                    let spec = match (alphabet, symbols, vocabulary) {
                        (Some(a), None, None) => {
                            let symbols = a.symbols().ok_or_else(|| {
                                ConfigError::new(&key, format!("alphabet {a:?} has no closed symbol set"))
                            })?;
                            KmerSpec::all_over(*k, symbols)
                        }
                        (None, Some(s), None) => KmerSpec::all_over(*k, s),
                        (None, None, Some(v)) => KmerSpec::new(*k, v.clone()),
                        _ => {
                            return Err(ConfigError::new(
                                key,
                                "give exactly one of `alphabet`, `symbols` or `vocabulary`",
                            ))
                        }
                    }
                    .map_err(|e| ConfigError::new(&key, e.to_string()))?;
                    reps.register_embedder(id, Arc::new(KmerEmbedder(spec.with_mode(*mode))));
                }
                RepresentationConfig::Length => reps.register_property_producer(id, Arc::new(LengthProperty)),
                RepresentationConfig::File { .. } => {}
            }
        }
        Ok(reps)
    }

    fn register_file(
        &self,
        reps: &mut Representations,
        id: &str,
        set: &str,
        path: &Path,
        known: &HashSet<&str>,
        key: &str,
    ) -> Result<(), ConfigError> {
        let Some(rc) = self.representations.get(id) else {
            return Err(ConfigError::new(key, format!("unknown representation `{id}`")));
        };
        if !matches!(rc, RepresentationConfig::File { .. }) {
            return Err(ConfigError::new(key, format!("representation `{id}` is not of kind `file`")));
        }
        if !known.contains(set) {
            return Err(ConfigError::new(key, format!("`{set}` is neither a group nor the reference")));
        }
        let full = self.base_dir.join(path);
        if !full.is_file() {
            return Err(ConfigError::new(key, format!("file not found: {}", full.display())));
        }
        match rc.content() {
            FileContent::Embeddings => reps.add_embedding_file(set, id, full),
            FileContent::Properties => reps.add_property_file(set, id, full),
        }
        Ok(())
    }

    fn build_metrics(&self, reference: Option<&Arc<SequenceSet>>, seed: u64) -> Result<Vec<Arc<dyn Metric>>, ConfigError> {
        if self.metrics.is_empty() {
            return Err(ConfigError::new("metrics", "no metrics configured"));
        }
        let mut names = HashSet::new();
        let mut out: Vec<Arc<dyn Metric>> = Vec::new();
        for (i, entry) in self.metrics.iter().enumerate() {
            let key = format!("metrics[{i}]");
            let mut obj = entry.params.clone();
            if obj.contains_key("metric") {
                return Err(ConfigError::new(format!("{key}.params.metric"), "`metric` belongs outside `params`"));
            }
            obj.insert("metric".into(), Value::String(entry.metric.clone()));
            let kind: MetricKind = serde_json::from_value(Value::Object(obj))
                .map_err(|e| ConfigError::new(format!("{key}.params"), e.to_string()))?;
            if let Some(repr) = kind.representation() {
                let want = if kind.uses_properties() {
                    FileContent::Properties
                } else {
                    FileContent::Embeddings
                };
                match self.representations.get(repr) {
                    None => {
                        return Err(ConfigError::new(
                            format!("{key}.params.representation"),
                            format!("unknown representation `{repr}`"),
                        ))
                    }
                    Some(rc) if rc.content() != want => {
                        return Err(ConfigError::new(
                            format!("{key}.params.representation"),
                            format!("`{}` needs {want:?} but `{repr}` provides {:?}", entry.metric, rc.content()),
                        ))
                    }
                    Some(_) => {}
                }
            }
            let mut metric = StandardMetric::new(kind.clone()).with_seed(seed);
            if kind.needs_reference() {
                let r = reference.ok_or_else(|| {
                    ConfigError::new("reference", format!("metric `{}` needs a reference set", entry.metric))
                })?;
                metric = metric.with_reference(r.clone());
            }
            if let Some(n) = &entry.name {
                metric = metric.named(n);
            }
            if let Some(d) = entry.direction {
                metric = metric.with_direction(d);
            }
            if !names.insert(metric.name().to_string()) {
                return Err(ConfigError::new(
                    format!("{key}.name"),
                    format!("duplicate metric name `{}`", metric.name()),
                ));
            }
            let metric: Arc<dyn Metric> = Arc::new(metric);
            out.push(match entry.fold {
                Some(f) => fold_wrap(metric, f.k, f.seed.unwrap_or(seed))
                    .map_err(|e| ConfigError::new(format!("{key}.fold.k"), e.to_string()))?,
                None => metric,
            });
        }
        Ok(out)
    }

    fn check_outputs(&self, metrics: &[Arc<dyn Metric>], trajectory: bool) -> Result<(), ConfigError> {
        for (i, o) in self.outputs.iter().enumerate() {
            let key = format!("outputs[{i}]");
            match (o.format, &o.chart) {
                (OutputFormat::Svg, None) => return Err(ConfigError::new(format!("{key}.chart"), "svg output needs a chart")),
                (OutputFormat::Svg, Some(c)) => {
                    if (c.kind == ChartKind::Trajectory) != trajectory {
                        return Err(ConfigError::new(
                            format!("{key}.chart.kind"),
                            "trajectory charts are only available for iteration runs",
                        ));
                    }
                    for m in &c.metrics {
                        if !metrics.iter().any(|x| x.name() == m) {
                            return Err(ConfigError::new(format!("{key}.chart.metrics"), format!("unknown metric `{m}`")));
                        }
                    }
                }
                (_, Some(_)) => return Err(ConfigError::new(format!("{key}.chart"), "charts need format `svg`")),
                _ => {}
            }
        }
        Ok(())
    }

    /// Loads every group and builds metrics and representations.
    pub fn prepare(&self, opts: &PrepareOptions) -> Result<Run, ConfigError> {
        if self.groups.is_empty() {
            return Err(ConfigError::new("groups", "no groups configured"));
        }
        let seed = opts.seed.unwrap_or(self.seed);
        let groups = self
            .groups
            .iter()
            .map(|(name, path)| read_set(&self.base_dir, path, name, self.alphabet, &format!("groups.{name}")))
            .collect::<Result<Vec<_>, _>>()?;
        let reference = self.load_reference(&groups)?;
        let mut reps = self.base_representations(opts)?;
        let mut known: HashSet<&str> = groups.iter().map(SequenceSet::name).collect();
        if let Some(r) = &reference {
            known.insert(r.name());
        }
        for (id, rc) in &self.representations {
            if let RepresentationConfig::File { paths, .. } = rc {
                for (set, path) in paths {
                    self.register_file(&mut reps, id, set, path, &known, &format!("representations.{id}.paths.{set}"))?;
                }
            }
        }
        let metrics = self.build_metrics(reference.as_ref(), seed)?;
        self.check_outputs(&metrics, false)?;
        Ok(Run {
            groups,
            reference,
            metrics,
            representations: reps,
            outputs: self.outputs.clone(),
        })
    }

    /// Loads the iteration manifest; indices must be strictly increasing.
    pub fn prepare_iterations(&self, opts: &PrepareOptions) -> Result<IterativeRun, ConfigError> {
        if self.iterations.is_empty() {
            return Err(ConfigError::new("iterations", "no iterations configured"));
        }
        let seed = opts.seed.unwrap_or(self.seed);
        let reference = self.load_reference(&[])?;
        let base = self.base_representations(opts)?;
        let mut iterations = Vec::new();
        let mut resolvers = Vec::new();
        for (i, it) in self.iterations.iter().enumerate() {
            let key = format!("iterations[{i}]");
            if it.groups.is_empty() {
                return Err(ConfigError::new(format!("{key}.groups"), "no groups configured"));
            }
            let groups = it
                .groups
                .iter()
                .map(|(name, path)| read_set(&self.base_dir, path, name, self.alphabet, &format!("{key}.groups.{name}")))
                .collect::<Result<Vec<_>, _>>()?;
            let mut reps = base.fork();
            let mut known: HashSet<&str> = groups.iter().map(SequenceSet::name).collect();
            if let Some(r) = &reference {
                known.insert(r.name());
            }
            for (id, rc) in &self.representations {
                if let RepresentationConfig::File { paths, .. } = rc {
                    for (set, path) in paths.iter().filter(|(s, _)| known.contains(s.as_str())) {
                        self.register_file(&mut reps, id, set, path, &known, &format!("representations.{id}.paths.{set}"))?;
                    }
                }
            }
            for (id, paths) in &it.files {
                for (set, path) in paths {
                    self.register_file(&mut reps, id, set, path, &known, &format!("{key}.files.{id}.{set}"))?;
                }
            }
            iterations.push(Iteration { index: it.index, groups });
            resolvers.push(reps);
        }
        let series = IterationSeries::new(iterations).map_err(|e| ConfigError::new("iterations", e.to_string()))?;
        let metrics = self.build_metrics(reference.as_ref(), seed)?;
        self.check_outputs(&metrics, true)?;
        Ok(IterativeRun {
            series,
            metrics,
            representations: resolvers,
        })
    }
}

impl Run {
    pub fn evaluate(&self) -> crate::error::Result<ReportTable> {
        crate::engine::evaluate(&self.groups, &self.metrics, &self.representations)
    }
}

/// Renders and writes every output under `out_dir`, returning the paths written.
pub fn write_outputs(
    report: &ReportTable,
    outputs: &[OutputSpec],
    out_dir: &Path,
    opts: &RenderOptions,
) -> Result<Vec<PathBuf>, FormatError> {
    let mut written = Vec::new();
    for o in outputs {
        let text = match o.format {
            OutputFormat::Markdown => report::render_table_with(report, TableFormat::Markdown, opts),
            OutputFormat::Csv => report::render_table_with(report, TableFormat::Csv, opts),
            OutputFormat::Json => report::render_table_with(report, TableFormat::Json, opts),
            OutputFormat::Svg => {
                let spec = o.chart.as_ref().ok_or_else(|| FormatError::Invalid("svg output needs a chart".into()))?;
                report::render_chart(report, spec).map_err(|e| FormatError::Invalid(e.to_string()))?
            }
        };
        let path = out_dir.join(&o.path);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| FormatError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        write_file(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
