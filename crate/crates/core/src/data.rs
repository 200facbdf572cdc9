//! Core data model: sequence sets and the representations aligned to them.

use std::borrow::Cow;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared alphabet of a sequence set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alphabet {
    /// The 20 canonical amino acids.
    Protein,
    Dna,
    Rna,
    /// SMILES strings; no closed symbol set.
    Smiles,
    #[default]
    Free,
}

impl Alphabet {
    /// Symbols of a closed alphabet, in canonical order.
    pub fn symbols(self) -> Option<&'static str> {
        match self {
            Alphabet::Protein => Some("ACDEFGHIKLMNPQRSTVWY"),
            Alphabet::Dna => Some("ACGT"),
            Alphabet::Rna => Some("ACGU"),
            Alphabet::Smiles | Alphabet::Free => None,
        }
    }
}

/// A named, ordered multiset of sequences.
///
/// Duplicated strings are distinct elements; index `i` names the same
/// element in every representation derived from the set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSet {
    name: String,
    sequences: Vec<String>,
    #[serde(default)]
    alphabet: Alphabet,
}

impl SequenceSet {
    /// Builds a set, rejecting empty sequences.
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        sequences: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let set = Self::new_allow_empty(name, sequences);
        if let Some(i) = set.sequences.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidParameter(format!(
                "sequence {i} of `{}` is empty",
                set.name
            )));
        }
        Ok(set)
    }

    /// Builds a set that may contain empty sequences.
    pub fn new_allow_empty<S: Into<String>>(
        name: impl Into<String>,
        sequences: impl IntoIterator<Item = S>,
    ) -> Self {
        SequenceSet {
            name: name.into(),
            sequences: sequences.into_iter().map(Into::into).collect(),
            alphabet: Alphabet::Free,
        }
    }

    /// Declares an alphabet, checking every symbol against it.
    pub fn with_alphabet(mut self, alphabet: Alphabet) -> Result<Self> {
        if let Some(symbols) = alphabet.symbols() {
            for (i, s) in self.sequences.iter().enumerate() {
                if let Some(c) = s.chars().find(|c| !symbols.contains(*c)) {
                    return Err(Error::InvalidParameter(format!(
                        "sequence {i} of `{}` contains `{c}` outside the {alphabet:?} alphabet",
                        self.name
                    )));
                }
            }
        }
        self.alphabet = alphabet;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn sequences(&self) -> &[String] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&str> {
        self.sequences.get(i).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.sequences.iter().map(String::as_str)
    }

    /// A new set holding the elements at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> SequenceSet {
        SequenceSet {
            name: self.name.clone(),
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            alphabet: self.alphabet,
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Row-major `rows × dim` matrix of finite reals, row-aligned with a [`SequenceSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    source_id: String,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>, source_id: impl Into<String>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::InvalidParameter(format!(
                "matrix payload has {} values, expected {rows}×{dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim.max(1),
                col: pos % dim.max(1),
            });
        }
        Ok(EmbeddingMatrix {
            rows,
            dim,
            data,
            source_id: source_id.into(),
        })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], source_id: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch(dim, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data, source_id)
    }

    /// Convenience for one-dimensional point sets.
    pub fn from_column(values: &[f64], source_id: impl Into<String>) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec(), source_id)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            rows: indices.len(),
            dim: self.dim,
            data,
            source_id: self.source_id.clone(),
        }
    }
}

/// Declared type of a property column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Real,
    Binary,
    Categorical,
    Vector(usize),
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Real => f.write_str("real"),
            ColumnType::Binary => f.write_str("binary"),
            ColumnType::Categorical => f.write_str("categorical"),
            ColumnType::Vector(k) => write!(f, "vec<{k}>"),
        }
    }
}

/// One typed property column.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyColumn {
    Real(Vec<f64>),
    Binary(Vec<bool>),
    Categorical(Vec<String>),
    /// Row-major values of fixed width.
    Vector { width: usize, data: Vec<f64> },
}

impl PropertyColumn {
    pub fn len(&self) -> usize {
        match self {
            PropertyColumn::Real(v) => v.len(),
            PropertyColumn::Binary(v) => v.len(),
            PropertyColumn::Categorical(v) => v.len(),
            PropertyColumn::Vector { width, data } => {
                if *width == 0 {
                    0
                } else {
                    data.len() / width
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            PropertyColumn::Real(_) => ColumnType::Real,
            PropertyColumn::Binary(_) => ColumnType::Binary,
            PropertyColumn::Categorical(_) => ColumnType::Categorical,
            PropertyColumn::Vector { width, .. } => ColumnType::Vector(*width),
        }
    }

    /// Width of one row when viewed numerically; `None` for categorical.
    pub fn numeric_width(&self) -> Option<usize> {
        match self {
            PropertyColumn::Real(_) | PropertyColumn::Binary(_) => Some(1),
            PropertyColumn::Vector { width, .. } => Some(*width),
            PropertyColumn::Categorical(_) => None,
        }
    }

    fn push_numeric(&self, i: usize, out: &mut Vec<f64>) {
        match self {
            PropertyColumn::Real(v) => out.push(v[i]),
            PropertyColumn::Binary(v) => out.push(if v[i] { 1.0 } else { 0.0 }),
            PropertyColumn::Vector { width, data } => {
                out.extend_from_slice(&data[i * width..(i + 1) * width])
            }
            PropertyColumn::Categorical(_) => unreachable!("categorical column has no numeric view"),
        }
    }

    fn select(&self, indices: &[usize]) -> PropertyColumn {
        match self {
            PropertyColumn::Real(v) => PropertyColumn::Real(indices.iter().map(|&i| v[i]).collect()),
            PropertyColumn::Binary(v) => {
                PropertyColumn::Binary(indices.iter().map(|&i| v[i]).collect())
            }
            PropertyColumn::Categorical(v) => {
                PropertyColumn::Categorical(indices.iter().map(|&i| v[i].clone()).collect())
            }
            PropertyColumn::Vector { width, data } => {
                let mut out = Vec::with_capacity(indices.len() * width);
                for &i in indices {
                    out.extend_from_slice(&data[i * width..(i + 1) * width]);
                }
                PropertyColumn::Vector {
                    width: *width,
                    data: out,
                }
            }
        }
    }
}

/// Named, typed per-sequence properties.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    rows: usize,
    columns: IndexMap<String, PropertyColumn>,
    source_id: String,
}

impl PropertyTable {
    pub fn new(rows: usize, source_id: impl Into<String>) -> Self {
        PropertyTable {
            rows,
            columns: IndexMap::new(),
            source_id: source_id.into(),
        }
    }

    /// Adds a column, validating its length and contents.
    pub fn with_column(mut self, name: impl Into<String>, column: PropertyColumn) -> Result<Self> {
        self.insert(name, column)?;
        Ok(self)
    }

    pub fn insert(&mut self, name: impl Into<String>, column: PropertyColumn) -> Result<()> {
        let name = name.into();
        if column.len() != self.rows {
            return Err(Error::Column(
                name,
                format!("has {} rows, table has {}", column.len(), self.rows),
            ));
        }
        match &column {
            PropertyColumn::Real(v) => {
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Column(name, format!("non-finite value at row {i}")));
                }
            }
            PropertyColumn::Vector { width, data } => {
                if *width == 0 || data.len() % width != 0 {
                    return Err(Error::Column(name, "ragged vector column".into()));
                }
                if let Some(i) = data.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Column(
                        name,
                        format!("non-finite value at row {}", i / width),
                    ));
                }
            }
            _ => {}
        }
        if self.columns.contains_key(&name) {
            return Err(Error::Column(name, "duplicate column".into()));
        }
        self.columns.insert(name, column);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &PropertyColumn)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn column(&self, name: &str) -> Result<&PropertyColumn> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::Column(name.to_string(), format!("not found in `{}`", self.source_id)))
    }

    /// A scalar column as reals; binary columns map to 0/1.
    pub fn real(&self, name: &str) -> Result<Cow<'_, [f64]>> {
        match self.column(name)? {
            PropertyColumn::Real(v) => Ok(Cow::Borrowed(v)),
            PropertyColumn::Binary(v) => {
                Ok(Cow::Owned(v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()))
            }
            other => Err(Error::Column(
                name.to_string(),
                format!("expected a scalar column, found {}", other.column_type()),
            )),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<Vec<String>> {
        match self.column(name)? {
            PropertyColumn::Categorical(v) => Ok(v.clone()),
            PropertyColumn::Binary(v) => Ok(v.iter().map(|&b| u8::from(b).to_string()).collect()),
            other => Err(Error::Column(
                name.to_string(),
                format!("expected a categorical column, found {}", other.column_type()),
            )),
        }
    }

    /// Concatenates the named numeric columns into one vector per row.
    pub fn numeric_rows(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        if names.is_empty() {
            return Err(Error::InvalidParameter("no property columns selected".into()));
        }
        let cols = names
            .iter()
            .map(|n| {
                let c = self.column(n)?;
                c.numeric_width()
                    .map(|_| c)
                    .ok_or_else(|| Error::Column(n.clone(), "categorical column is not numeric".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.rows)
            .map(|i| {
                let mut row = Vec::new();
                for c in &cols {
                    c.push_numeric(i, &mut row);
                }
                row
            })
            .collect())
    }

    /// Stacks tables with identical column layouts row-wise.
    pub fn concat(parts: &[PropertyTable], source_id: impl Into<String>) -> Result<PropertyTable> {
        let mut out = PropertyTable::new(0, source_id);
        let Some(first) = parts.first() else {
            return Ok(out);
        };
        for (name, col) in &first.columns {
            let mut merged = match col {
                PropertyColumn::Real(_) => PropertyColumn::Real(Vec::new()),
                PropertyColumn::Binary(_) => PropertyColumn::Binary(Vec::new()),
                PropertyColumn::Categorical(_) => PropertyColumn::Categorical(Vec::new()),
                PropertyColumn::Vector { width, .. } => PropertyColumn::Vector {
                    width: *width,
                    data: Vec::new(),
                },
            };
            for part in parts {
                match (&mut merged, part.column(name)?) {
                    (PropertyColumn::Real(a), PropertyColumn::Real(b)) => a.extend_from_slice(b),
                    (PropertyColumn::Binary(a), PropertyColumn::Binary(b)) => a.extend_from_slice(b),
                    (PropertyColumn::Categorical(a), PropertyColumn::Categorical(b)) => {
                        a.extend_from_slice(b)
                    }
                    (
                        PropertyColumn::Vector { width: wa, data: a },
                        PropertyColumn::Vector { width: wb, data: b },
                    ) if wa == wb => a.extend_from_slice(b),
                    (_, other) => {
                        return Err(Error::Column(
                            name.clone(),
                            format!("cannot stack {} onto {}", other.column_type(), col.column_type()),
                        ))
                    }
                }
            }
            out.rows = merged.len();
            out.columns.insert(name.clone(), merged);
        }
        if first.columns.is_empty() {
            out.rows = parts.iter().map(|p| p.rows).sum();
        }
        Ok(out)
    }

    pub fn select(&self, indices: &[usize]) -> PropertyTable {
        PropertyTable {
            rows: indices.len(),
            columns: self
                .columns
                .iter()
                .map(|(k, c)| (k.clone(), c.select(indices)))
                .collect(),
            source_id: self.source_id.clone(),
        }
    }
}
