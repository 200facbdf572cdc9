//! Property table CSV with typed headers.
//!
//! Header cells are `name:type` with type `real`, `binary`, `categorical`
//! or `vec<k>`; a `vec<k>` column spans `k` adjacent cells headed
//! `name[0]:vec<k>` .. `name[k-1]:vec<k>`. Cells are not quoted.

use std::path::Path;

use crate::data::{ColumnType, PropertyColumn, PropertyTable};
use crate::error::FormatError;
use crate::io::embeddings::write_file;
use crate::io::sequences::read_text;

fn parse_type(token: &str) -> Option<ColumnType> {
    match token {
        "real" => Some(ColumnType::Real),
        "binary" => Some(ColumnType::Binary),
        "categorical" => Some(ColumnType::Categorical),
        _ => token
            .strip_prefix("vec<")
            .and_then(|r| r.strip_suffix('>'))
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k > 0)
            .map(ColumnType::Vector),
    }
}

struct Spec {
    name: String,
    ty: ColumnType,
    first_cell: usize,
}

fn parse_header(header: &str) -> Result<Vec<Spec>, FormatError> {
    let cells: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut specs = Vec::new();
    let mut j = 0;
    while j < cells.len() {
        let col = j + 1;
        let (name, ty) = cells[j]
            .rsplit_once(':')
            .ok_or_else(|| FormatError::cell(1, col, format!("expected `name:type`, found `{}`", cells[j])))?;
        let ty = parse_type(ty).ok_or_else(|| FormatError::cell(1, col, format!("unknown type `{ty}`")))?;
        match ty {
            ColumnType::Vector(k) => {
                let base = name
                    .strip_suffix("[0]")
                    .ok_or_else(|| FormatError::cell(1, col, format!("vector column `{name}` must start at `[0]`")))?;
                for i in 0..k {
                    let want = format!("{base}[{i}]:vec<{k}>");
                    if cells.get(j + i) != Some(&want.as_str()) {
                        return Err(FormatError::cell(
                            1,
                            j + i + 1,
                            format!("width mismatch: expected header cell `{want}`"),
                        ));
                    }
                }
                specs.push(Spec {
                    name: base.to_string(),
                    ty,
                    first_cell: j,
                });
                j += k;
            }
            _ => {
                specs.push(Spec {
                    name: name.to_string(),
                    ty,
                    first_cell: j,
                });
                j += 1;
            }
        }
    }
    Ok(specs)
}

pub fn from_csv(text: &str, source_id: &str) -> Result<PropertyTable, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| FormatError::Invalid("empty property file".into()))?;
    let specs = parse_header(header.trim_end())?;
    let width: usize = specs
        .iter()
        .map(|s| match s.ty {
            ColumnType::Vector(k) => k,
            _ => 1,
        })
        .sum();

    let mut columns: Vec<PropertyColumn> = specs
        .iter()
        .map(|s| match s.ty {
            ColumnType::Real => PropertyColumn::Real(Vec::new()),
            ColumnType::Binary => PropertyColumn::Binary(Vec::new()),
            ColumnType::Categorical => PropertyColumn::Categorical(Vec::new()),
            ColumnType::Vector(k) => PropertyColumn::Vector { width: k, data: Vec::new() },
        })
        .collect();

    let mut rows = 0;
    for (i, line) in lines {
        let line_no = i + 1;
        let cells: Vec<&str> = line.trim_end().split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(FormatError::line(
                line_no,
                format!("width mismatch: expected {width} cells, found {}", cells.len()),
            ));
        }
        let real = |j: usize| -> Result<f64, FormatError> {
            let v: f64 = cells[j]
                .parse()
                .map_err(|_| FormatError::cell(line_no, j + 1, format!("cannot parse `{}` as real", cells[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(FormatError::cell(line_no, j + 1, format!("non-finite value `{}`", cells[j])))
            }
        };
        for (spec, col) in specs.iter().zip(columns.iter_mut()) {
            let j = spec.first_cell;
            match col {
                PropertyColumn::Real(v) => v.push(real(j)?),
                PropertyColumn::Binary(v) => v.push(match cells[j] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(FormatError::cell(
                            line_no,
                            j + 1,
                            format!("binary column `{}` must be 0 or 1, found `{other}`", spec.name),
                        ))
                    }
                }),
                PropertyColumn::Categorical(v) => v.push(cells[j].to_string()),
                PropertyColumn::Vector { width, data } => {
                    for o in 0..*width {
                        data.push(real(j + o)?);
                    }
                }
            }
        }
        rows += 1;
    }

    let mut table = PropertyTable::new(rows, source_id);
    for (spec, col) in specs.into_iter().zip(columns) {
        table
            .insert(spec.name, col)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
    }
    Ok(table)
}

pub fn to_csv(table: &PropertyTable) -> String {
    let mut header = Vec::new();
    for (name, col) in table.columns() {
        match col.column_type() {
            ColumnType::Vector(k) => header.extend((0..k).map(|i| format!("{name}[{i}]:vec<{k}>"))),
            ty => header.push(format!("{name}:{ty}")),
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..table.rows() {
        let mut cells = Vec::new();
        for (_, col) in table.columns() {
            match col {
                PropertyColumn::Real(v) => cells.push(v[r].to_string()),
                PropertyColumn::Binary(v) => cells.push(u8::from(v[r]).to_string()),
                PropertyColumn::Categorical(v) => cells.push(v[r].clone()),
                PropertyColumn::Vector { width, data } => {
                    cells.extend(data[r * width..(r + 1) * width].iter().map(f64::to_string))
                }
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn load_properties(path: impl AsRef<Path>, expected_rows: Option<usize>) -> Result<PropertyTable, FormatError> {
    let path = path.as_ref();
    let source_id = path.display().to_string();
    let table = from_csv(&read_text(path)?, &source_id)
        .map_err(|e| FormatError::Invalid(format!("{source_id}: {e}")))?;
    if let Some(n) = expected_rows {
        if table.rows() != n {
            return Err(FormatError::Invalid(format!(
                "{source_id}: expected {n} rows, found {}",
                table.rows()
            )));
        }
    }
    Ok(table)
}

pub fn save_properties(path: impl AsRef<Path>, table: &PropertyTable) -> Result<(), FormatError> {
    write_file(path.as_ref(), to_csv(table).as_bytes())
}
