//! Representation cache keyed by `(model id, sequence string)`.
//!
//! Each model has its own lock, held while its misses are computed, so a
//! key is computed at most once even under concurrent requests.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Optional second-level store consulted before the model is invoked.
pub trait RowStore<T>: Send + Sync {
    fn load(&self, model_id: &str, sequence: &str) -> Option<T>;
    fn store(&self, model_id: &str, sequence: &str, row: &T);
}

type ModelRows<T> = Arc<Mutex<HashMap<String, T>>>;

pub struct Cache<T> {
    models: Mutex<HashMap<String, ModelRows<T>>>,
    hits: AtomicU64,
    misses: AtomicU64,
    backing: Option<Arc<dyn RowStore<T>>>,
}

impl<T> Default for Cache<T> {
    fn default() -> Self {
        Cache {
            models: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            backing: None,
        }
    }
}

impl<T: Clone> Cache<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_backing(backing: Arc<dyn RowStore<T>>) -> Self {
        Cache {
            backing: Some(backing),
            ..Self::default()
        }
    }

    pub fn hit_count(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn miss_count(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    fn rows_for(&self, model_id: &str) -> ModelRows<T> {
        let mut models = self.models.lock().expect("cache lock poisoned");
        models.entry(model_id.to_string()).or_default().clone()
    }

    /// Returns one row per input sequence, invoking `model` once on the
    /// distinct cache misses (in first-occurrence order).
    ///
    /// If the model fails or returns the wrong number of rows, nothing from
    /// that batch is stored.
    pub fn get_or_compute<S, F>(&self, model_id: &str, sequences: &[S], model: F) -> Result<Vec<T>>
    where
        S: AsRef<str>,
        F: FnOnce(&[&str]) -> Result<Vec<T>>,
    {
        let rows = self.rows_for(model_id);
        let mut rows = rows.lock().expect("cache lock poisoned");

        let mut pending: Vec<&str> = Vec::new();
        let mut from_store: Vec<(&str, T)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let (mut hits, mut misses) = (0u64, 0u64);
        for s in sequences {
            let s = s.as_ref();
            if rows.contains_key(s) || !seen.insert(s) {
                hits += 1;
                continue;
            }
            misses += 1;
            match self.backing.as_ref().and_then(|b| b.load(model_id, s)) {
                Some(row) => from_store.push((s, row)),
                None => pending.push(s),
            }
        }

        let computed = if pending.is_empty() {
            Vec::new()
        } else {
            let out = model(&pending)?;
            if out.len() != pending.len() {
                return Err(Error::Model(format!(
                    "model `{model_id}` returned {} rows for {} sequences",
                    out.len(),
                    pending.len()
                )));
            }
            out
        };
        for (s, row) in pending.iter().zip(computed) {
            if let Some(b) = &self.backing {
                b.store(model_id, s, &row);
            }
            rows.insert((*s).to_string(), row);
        }
        for (s, row) in from_store {
            rows.insert(s.to_string(), row);
        }
        self.hits.fetch_add(hits, Ordering::Relaxed);
        self.misses.fetch_add(misses, Ordering::Relaxed);

        Ok(sequences.iter().map(|s| rows[s.as_ref()].clone()).collect())
    }
}

/// On-disk embedding rows: one little-endian f64 file per
/// `(model id, SHA-256 of the sequence)`.
pub struct DiskStore {
    root: PathBuf,
}

impl DiskStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DiskStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, model_id: &str, sequence: &str) -> PathBuf {
        let digest = Sha256::digest(sequence.as_bytes());
        let safe_model: String = model_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.root.join(safe_model).join(format!("{}.f64", hex::encode(digest)))
    }
}

impl RowStore<Vec<f64>> for DiskStore {
    fn load(&self, model_id: &str, sequence: &str) -> Option<Vec<f64>> {
        let bytes = fs::read(self.path(model_id, sequence)).ok()?;
        if bytes.len() % 8 != 0 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        )
    }

    fn store(&self, model_id: &str, sequence: &str, row: &Vec<f64>) {
        let path = self.path(model_id, sequence);
        if let Some(dir) = path.parent() {
            if fs::create_dir_all(dir).is_err() {
                return;
            }
        }
        let bytes: Vec<u8> = row.iter().flat_map(|v| v.to_le_bytes()).collect();
        if let Err(e) = fs::write(&path, bytes) {
            log::warn!("cannot write cache entry {}: {e}", path.display());
        }
    }
}
