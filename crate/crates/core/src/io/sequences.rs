//! FASTA and one-per-line sequence files.

use std::fs;
use std::path::Path;

use crate::data::SequenceSet;
use crate::error::FormatError;

/// A parsed sequence and the 1-based line where it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub id: Option<String>,
    pub sequence: String,
    pub line: usize,
}

/// Parses FASTA (first non-blank byte is `>`) or plain one-per-line text.
///
/// Wrapped FASTA bodies are concatenated; blank lines are skipped; CRLF
/// endings and trailing whitespace are stripped.
pub fn parse_records(text: &str) -> Result<Vec<SequenceRecord>, FormatError> {
    let fasta = text.trim_start().starts_with('>');
    let mut records: Vec<SequenceRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        if !fasta {
            records.push(SequenceRecord {
                id: None,
                sequence: trimmed.trim_start().to_string(),
                line,
            });
        } else if let Some(header) = trimmed.strip_prefix('>') {
            if let Some(prev) = records.last() {
                if prev.sequence.is_empty() {
                    return Err(FormatError::line(prev.line, "FASTA record has an empty body"));
                }
            }
            records.push(SequenceRecord {
                id: Some(header.trim().to_string()),
                sequence: String::new(),
                line,
            });
        } else {
            let rec = records.last_mut().expect("fasta text starts with a header");
            rec.sequence.push_str(trimmed.trim_start());
        }
    }
    match records.last() {
        None => Err(FormatError::Invalid("empty sequence file".into())),
        Some(r) if r.sequence.is_empty() => {
            Err(FormatError::line(r.line, "FASTA record has an empty body"))
        }
        Some(_) => Ok(records),
    }
}

pub fn parse_sequences(text: &str, name: impl Into<String>) -> Result<SequenceSet, FormatError> {
    let records = parse_records(text)?;
    Ok(SequenceSet::new_allow_empty(
        name,
        records.into_iter().map(|r| r.sequence),
    ))
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a sequence file, naming the set after the file stem.
pub fn load_sequences(path: impl AsRef<Path>) -> Result<SequenceSet, FormatError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_sequences(&read_text(path)?, name).map_err(|e| match e {
        FormatError::Io { .. } => e,
        other => FormatError::Invalid(format!("{}: {other}", path.display())),
    })
}

/// Writes one sequence per line.
pub fn write_plain(set: &SequenceSet) -> String {
    let mut out = String::new();
    for s in set.iter() {
        out.push_str(s);
        out.push('\n');
    }
    out
}
