//! Embedding matrix files: a little-endian binary layout and a CSV
//! alternative.
//!
//! Binary layout: `"SQME"`, version `u8 = 1`, element type `u8 = 1`
//! (f32 LE), rows `u64` LE, cols `u64` LE, then the row-major payload.

use std::fs;
use std::path::Path;

use crate::data::EmbeddingMatrix;
use crate::error::FormatError;

pub const MAGIC: &[u8; 4] = b"SQME";
pub const VERSION: u8 = 1;
pub const ELEMENT_F32: u8 = 1;
pub const HEADER_LEN: usize = 22;

/// Encodes as the binary format. Values are stored as f32.
pub fn to_binary(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(ELEMENT_F32);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u64).to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn from_binary(bytes: &[u8], source_id: &str) -> Result<EmbeddingMatrix, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != ELEMENT_F32 {
        return Err(FormatError::UnsupportedElementType(bytes[5]));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(6), word(14));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| FormatError::Invalid(format!("header declares {rows}×{cols}, too large")))?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::Invalid(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, c) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(c.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(FormatError::Invalid(format!(
                "non-finite value at row {}, column {} (byte {})",
                i / cols,
                i % cols,
                HEADER_LEN + 4 * i
            )));
        }
        data.push(f64::from(v));
    }
    EmbeddingMatrix::new(rows, cols, data, source_id).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Encodes as CSV: a `dim=<d>` line, then one comma-separated row per line.
pub fn to_csv(m: &EmbeddingMatrix) -> String {
    let mut out = format!("dim={}\n", m.dim());
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str, source_id: &str) -> Result<EmbeddingMatrix, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| FormatError::Invalid("empty embedding file".into()))?;
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| FormatError::line(1, format!("expected `dim=<d>` header, found `{}`", header.trim())))?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines {
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != dim {
            return Err(FormatError::line(
                i + 1,
                format!("expected {dim} values, found {}", cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| FormatError::cell(i + 1, j + 1, format!("cannot parse `{}`", cell.trim())))?;
            if !v.is_finite() {
                return Err(FormatError::cell(i + 1, j + 1, format!("non-finite value `{}`", cell.trim())));
            }
            data.push(v);
        }
        rows += 1;
    }
    EmbeddingMatrix::new(rows, dim, data, source_id).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// True when the file starts with the binary magic.
pub fn is_binary(path: &Path) -> bool {
    use std::io::Read;
    let mut buf = [0u8; 4];
    fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut buf))
        .map(|_| &buf == MAGIC)
        .unwrap_or(false)
}

/// Loads either format, sniffed by the magic bytes, and checks the row count.
pub fn load_embeddings(path: impl AsRef<Path>, expected_rows: Option<usize>) -> Result<EmbeddingMatrix, FormatError> {
    let path = path.as_ref();
    let source_id = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let located = |e: FormatError| FormatError::Invalid(format!("{source_id}: {e}"));
    let m = if bytes.starts_with(MAGIC) {
        from_binary(&bytes, &source_id).map_err(located)?
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| FormatError::BadMagic)
            .map_err(located)?;
        from_csv(&text, &source_id).map_err(located)?
    };
    if let Some(n) = expected_rows {
        if m.rows() != n {
            return Err(FormatError::Invalid(format!(
                "{source_id}: expected {n} rows, found {}",
                m.rows()
            )));
        }
    }
    Ok(m)
}

pub fn save_binary(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<(), FormatError> {
    write_file(path.as_ref(), &to_binary(m))
}

pub fn save_csv(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<(), FormatError> {
    write_file(path.as_ref(), to_csv(m).as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}
