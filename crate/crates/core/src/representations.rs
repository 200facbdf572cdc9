//! Representation producers and the resolver that serves them to metrics.
//!
//! Resolution order for `(set, representation id)`: a registered producer,
//! then an in-memory matrix or table, then a binary file, then a CSV file.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cache::Cache;
use crate::data::{EmbeddingMatrix, PropertyColumn, PropertyTable, SequenceSet};
use crate::engine::Resolver;
use crate::error::{Error, Result};
use crate::io::embeddings::{is_binary, load_embeddings};
use crate::io::properties::load_properties;

/// Produces one embedding row per sequence.
pub trait EmbeddingProducer: Send + Sync {
    fn embed(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>>;
}

/// Produces a property table row-aligned with the batch.
pub trait PropertyProducer: Send + Sync {
    fn compute(&self, batch: &[&str]) -> Result<PropertyTable>;
}

impl<F> EmbeddingProducer for F
where
    F: Fn(&[&str]) -> Result<Vec<Vec<f64>>> + Send + Sync,
{
    fn embed(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>> {
        self(batch)
    }
}

/// Whether k-mer rows hold frequencies or raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KmerMode {
    #[default]
    Frequency,
    Counts,
}

/// An ordered k-mer vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct KmerSpec {
    k: usize,
    vocabulary: Vec<String>,
    mode: KmerMode,
}

impl KmerSpec {
    pub fn new(k: usize, vocabulary: Vec<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k-mer length must be at least 1".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &vocabulary {
            if v.chars().count() != k {
                return Err(Error::InvalidParameter(format!("vocabulary entry `{v}` is not of length {k}")));
            }
            if !seen.insert(v.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate vocabulary entry `{v}`")));
            }
        }
        if vocabulary.is_empty() {
            return Err(Error::Empty("k-mer vocabulary"));
        }
        Ok(KmerSpec {
            k,
            vocabulary,
            mode: KmerMode::Frequency,
        })
    }

    /// Every k-mer over `symbols`, in lexicographic order of symbol positions.
    pub fn all_over(k: usize, symbols: &str) -> Result<Self> {
        let mut alphabet: Vec<char> = Vec::new();
        for c in symbols.chars() {
            if !alphabet.contains(&c) {
                alphabet.push(c);
            }
        }
        if alphabet.is_empty() {
            return Err(Error::Empty("alphabet"));
        }
        let size = (alphabet.len() as u64).checked_pow(k as u32).filter(|&s| s <= 1 << 24);
        if size.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{}^{k} k-mers is too large a vocabulary",
                alphabet.len()
            )));
        }
        let mut vocab = vec![String::new()];
        for _ in 0..k {
            vocab = vocab
                .iter()
                .flat_map(|p| alphabet.iter().map(move |c| format!("{p}{c}")))
                .collect();
        }
        KmerSpec::new(k, vocab)
    }

    pub fn with_mode(mut self, mode: KmerMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn mode(&self) -> KmerMode {
        self.mode
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.vocabulary.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect()
    }

    fn row(&self, index: &HashMap<&str, usize>, seq: &str, position: usize) -> Result<Vec<f64>> {
        let bounds: Vec<usize> = seq.char_indices().map(|(b, _)| b).chain([seq.len()]).collect();
        let len = bounds.len() - 1;
        if len < self.k {
            return Err(Error::InvalidParameter(format!(
                "sequence {position} has length {len}, shorter than k = {}",
                self.k
            )));
        }
        let windows = len - self.k + 1;
        let mut row = vec![0.0; self.vocabulary.len()];
        for w in 0..windows {
            if let Some(&j) = index.get(&seq[bounds[w]..bounds[w + self.k]]) {
                row[j] += 1.0;
            }
        }
        if self.mode == KmerMode::Frequency {
            let denom = windows as f64;
            row.iter_mut().for_each(|v| *v /= denom);
        }
        Ok(row)
    }
}

fn kmer_rows(spec: &KmerSpec, batch: &[&str]) -> Result<Vec<Vec<f64>>> {
    let index = spec.index();
    batch.iter().enumerate().map(|(i, s)| spec.row(&index, s, i)).collect()
}

/// k-mer frequency (or count) embedding of every sequence.
pub fn kmer_embed(sequences: &SequenceSet, spec: &KmerSpec) -> Result<EmbeddingMatrix> {
    let batch: Vec<&str> = sequences.iter().collect();
    let rows = kmer_rows(spec, &batch)?;
    rows_to_matrix(rows, spec.vocabulary.len(), &format!("kmer:{}", spec.k))
}

/// Character count of every sequence, as the real column `length`.
pub fn length_property(sequences: &SequenceSet) -> PropertyTable {
    let lengths = sequences.iter().map(|s| s.chars().count() as f64).collect();
    PropertyTable::new(sequences.len(), "length")
        .with_column("length", PropertyColumn::Real(lengths))
        .expect("lengths are finite and aligned")
}

/// [`kmer_embed`] as a producer.
pub struct KmerEmbedder(pub KmerSpec);

impl EmbeddingProducer for KmerEmbedder {
    fn embed(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>> {
        kmer_rows(&self.0, batch)
    }
}

/// [`length_property`] as a producer.
pub struct LengthProperty;

impl PropertyProducer for LengthProperty {
    fn compute(&self, batch: &[&str]) -> Result<PropertyTable> {
        Ok(length_property(&SequenceSet::new_allow_empty("", batch.iter().copied())))
    }
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, dim_if_empty: usize, source_id: &str) -> Result<EmbeddingMatrix> {
    if rows.is_empty() {
        return EmbeddingMatrix::new(0, dim_if_empty, Vec::new(), source_id);
    }
    EmbeddingMatrix::from_rows(&rows, source_id)
}

type Key = (String, String);

/// Serves embeddings and properties for named sets, with shared caches.
pub struct Representations {
    embedders: IndexMap<String, Arc<dyn EmbeddingProducer>>,
    property_producers: IndexMap<String, Arc<dyn PropertyProducer>>,
    embeddings: HashMap<Key, Arc<EmbeddingMatrix>>,
    properties: HashMap<Key, Arc<PropertyTable>>,
    embedding_files: HashMap<Key, Vec<PathBuf>>,
    property_files: HashMap<Key, PathBuf>,
    loaded_embeddings: Mutex<HashMap<Key, Arc<EmbeddingMatrix>>>,
    loaded_properties: Mutex<HashMap<Key, Arc<PropertyTable>>>,
    embedding_cache: Option<Arc<Cache<Vec<f64>>>>,
    property_cache: Option<Arc<Cache<PropertyTable>>>,
}

impl Default for Representations {
    fn default() -> Self {
        Self::new()
    }
}

fn key(set: &str, repr: &str) -> Key {
    (set.to_string(), repr.to_string())
}

impl Representations {
    /// A resolver with in-memory caching of producer outputs.
    pub fn new() -> Self {
        Self::with_caches(Some(Arc::new(Cache::new())), Some(Arc::new(Cache::new())))
    }

    /// A resolver that invokes producers on every request.
    pub fn uncached() -> Self {
        Self::with_caches(None, None)
    }

    pub fn with_caches(
        embedding_cache: Option<Arc<Cache<Vec<f64>>>>,
        property_cache: Option<Arc<Cache<PropertyTable>>>,
    ) -> Self {
        Representations {
            embedders: IndexMap::new(),
            property_producers: IndexMap::new(),
            embeddings: HashMap::new(),
            properties: HashMap::new(),
            embedding_files: HashMap::new(),
            property_files: HashMap::new(),
            loaded_embeddings: Mutex::new(HashMap::new()),
            loaded_properties: Mutex::new(HashMap::new()),
            embedding_cache,
            property_cache,
        }
    }

    /// Same producers and caches, without any set-specific data or files.
    pub fn fork(&self) -> Self {
        let mut r = Self::with_caches(self.embedding_cache.clone(), self.property_cache.clone());
        r.embedders = self.embedders.clone();
        r.property_producers = self.property_producers.clone();
        r
    }

    pub fn embedding_cache(&self) -> Option<&Arc<Cache<Vec<f64>>>> {
        self.embedding_cache.as_ref()
    }

    pub fn property_cache(&self) -> Option<&Arc<Cache<PropertyTable>>> {
        self.property_cache.as_ref()
    }

    pub fn register_embedder(&mut self, id: impl Into<String>, producer: Arc<dyn EmbeddingProducer>) {
        self.embedders.insert(id.into(), producer);
    }

    pub fn register_property_producer(&mut self, id: impl Into<String>, producer: Arc<dyn PropertyProducer>) {
        self.property_producers.insert(id.into(), producer);
    }

    pub fn insert_embeddings(&mut self, set: &str, repr: &str, m: EmbeddingMatrix) {
        self.embeddings.insert(key(set, repr), Arc::new(m));
    }

    pub fn insert_properties(&mut self, set: &str, repr: &str, t: PropertyTable) {
        self.properties.insert(key(set, repr), Arc::new(t));
    }

    /// Registers a binary or CSV embedding file; binary wins when both exist.
    pub fn add_embedding_file(&mut self, set: &str, repr: &str, path: impl Into<PathBuf>) {
        self.embedding_files.entry(key(set, repr)).or_default().push(path.into());
    }

    pub fn add_property_file(&mut self, set: &str, repr: &str, path: impl Into<PathBuf>) {
        self.property_files.insert(key(set, repr), path.into());
    }

    /// True if anything can serve `repr`.
    pub fn knows(&self, repr: &str) -> bool {
        self.embedders.contains_key(repr)
            || self.property_producers.contains_key(repr)
            || self.embeddings.keys().any(|(_, r)| r == repr)
            || self.properties.keys().any(|(_, r)| r == repr)
            || self.embedding_files.keys().any(|(_, r)| r == repr)
            || self.property_files.keys().any(|(_, r)| r == repr)
    }

    fn produce_embeddings(&self, id: &str, p: &dyn EmbeddingProducer, set: &SequenceSet) -> Result<EmbeddingMatrix> {
        let seqs: Vec<&str> = set.iter().collect();
        let rows = match &self.embedding_cache {
            Some(cache) => cache.get_or_compute(id, &seqs, |batch| p.embed(batch))?,
            None => {
                let rows = p.embed(&seqs)?;
                if rows.len() != seqs.len() {
                    return Err(Error::Model(format!(
                        "model `{id}` returned {} rows for {} sequences",
                        rows.len(),
                        seqs.len()
                    )));
                }
                rows
            }
        };
        rows_to_matrix(rows, 0, id)
    }

    fn produce_properties(&self, id: &str, p: &dyn PropertyProducer, set: &SequenceSet) -> Result<PropertyTable> {
        let seqs: Vec<&str> = set.iter().collect();
        match &self.property_cache {
            Some(cache) => {
                let rows = cache.get_or_compute(id, &seqs, |batch| {
                    let table = p.compute(batch)?;
                    if table.rows() != batch.len() {
                        return Err(Error::Model(format!(
                            "model `{id}` returned {} rows for {} sequences",
                            table.rows(),
                            batch.len()
                        )));
                    }
                    Ok((0..table.rows()).map(|i| table.select(&[i])).collect())
                })?;
                PropertyTable::concat(&rows, id)
            }
            None => p.compute(&seqs),
        }
    }
}

impl Resolver for Representations {
    fn embeddings(&self, set: &SequenceSet, repr: &str) -> Result<Arc<EmbeddingMatrix>> {
        if let Some(p) = self.embedders.get(repr) {
            return self.produce_embeddings(repr, p.as_ref(), set).map(Arc::new);
        }
        let k = key(set.name(), repr);
        if let Some(m) = self.embeddings.get(&k) {
            return Ok(m.clone());
        }
        let Some(paths) = self.embedding_files.get(&k) else {
            return Err(Error::MissingRepresentation(repr.into(), set.name().into()));
        };
        let mut loaded = self.loaded_embeddings.lock().expect("loader lock poisoned");
        if let Some(m) = loaded.get(&k) {
            return Ok(m.clone());
        }
        let path = paths
            .iter()
            .find(|p| is_binary(p))
            .unwrap_or(&paths[0]);
        let m = Arc::new(load_embeddings(path, Some(set.len())).map_err(|e| Error::Load(e.to_string()))?);
        loaded.insert(k, m.clone());
        Ok(m)
    }

    fn properties(&self, set: &SequenceSet, repr: &str) -> Result<Arc<PropertyTable>> {
        if let Some(p) = self.property_producers.get(repr) {
            return self.produce_properties(repr, p.as_ref(), set).map(Arc::new);
        }
        let k = key(set.name(), repr);
        if let Some(t) = self.properties.get(&k) {
            return Ok(t.clone());
        }
        let Some(path) = self.property_files.get(&k) else {
            return Err(Error::MissingRepresentation(repr.into(), set.name().into()));
        };
        let mut loaded = self.loaded_properties.lock().expect("loader lock poisoned");
        if let Some(t) = loaded.get(&k) {
            return Ok(t.clone());
        }
        let t = Arc::new(load_properties(path, Some(set.len())).map_err(|e| Error::Load(e.to_string()))?);
        loaded.insert(k, t.clone());
        Ok(t)
    }
}
