use serde::{Deserialize, Serialize};

use crate::engine::{CellResult, ReportTable, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    /// Digits after the decimal point.
    pub precision: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { precision: 4 }
    }
}

fn number(v: f64, precision: usize) -> String {
    let s = format!("{v:.precision$}");
    // -0.0000 reads as a sign error in a table
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn cell_text(cell: &CellResult, opts: &RenderOptions) -> String {
    match cell {
        CellResult::Error { .. } => "ERR".to_string(),
        CellResult::Ok(v) => match v.deviation {
            Some(d) => format!("{} ± {}", number(v.value, opts.precision), number(d, opts.precision)),
            None => number(v.value, opts.precision),
        },
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn headers(report: &ReportTable) -> Vec<String> {
    report
        .metrics
        .iter()
        .map(|m| format!("{} {}", m.name, m.direction.arrow()))
        .collect()
}

pub fn render_table(report: &ReportTable, format: TableFormat) -> String {
    render_table_with(report, format, &RenderOptions::default())
}

pub fn render_table_with(report: &ReportTable, format: TableFormat, opts: &RenderOptions) -> String {
    match format {
        TableFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        TableFormat::Markdown => {
            let mut out = format!("| Group | {} |\n", headers(report).join(" | "));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(report.metrics.len())));
            for (g, row) in report.groups.iter().zip(&report.cells) {
                let cells: Vec<String> = row.iter().map(|c| cell_text(c, opts)).collect();
                out.push_str(&format!("| {} | {} |\n", g.replace('|', "\\|"), cells.join(" | ")));
            }
            out
        }
        TableFormat::Csv => {
            let mut head = vec!["group".to_string()];
            head.extend(headers(report));
            let mut out = head.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",");
            out.push('\n');
            for (g, row) in report.groups.iter().zip(&report.cells) {
                let mut cells = vec![csv_field(g)];
                cells.extend(row.iter().map(|c| csv_field(&cell_text(c, opts))));
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
    }
}

/// Long-form rendering: one row per (iteration, group) for markdown and
/// CSV, the serialized trajectory for JSON.
pub fn render_trajectory(trajectory: &Trajectory, format: TableFormat, opts: &RenderOptions) -> String {
    if format == TableFormat::Json {
        let mut s = serde_json::to_string_pretty(trajectory).expect("trajectory serializes");
        s.push('\n');
        return s;
    }
    let Some(first) = trajectory.tables.first() else {
        return String::new();
    };
    let heads = headers(first);
    let mut out = match format {
        TableFormat::Markdown => format!(
            "| Iteration | Group | {} |\n|---:|---|{}\n",
            heads.join(" | "),
            "---:|".repeat(heads.len())
        ),
        _ => {
            let mut head = vec!["iteration".to_string(), "group".to_string()];
            head.extend(heads);
            let mut s = head.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",");
            s.push('\n');
            s
        }
    };
    for (it, table) in trajectory.iterations.iter().zip(&trajectory.tables) {
        for (g, row) in table.groups.iter().zip(&table.cells) {
            let cells: Vec<String> = row.iter().map(|c| cell_text(c, opts)).collect();
            match format {
                TableFormat::Markdown => out.push_str(&format!("| {it} | {g} | {} |\n", cells.join(" | "))),
                _ => {
                    let mut fields = vec![it.to_string(), csv_field(g)];
                    fields.extend(cells.iter().map(|c| csv_field(c)));
                    out.push_str(&fields.join(","));
                    out.push('\n');
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Direction, MetricHeader, MetricValue};

    fn table(cell: CellResult) -> ReportTable {
        ReportTable {
            groups: vec!["g".into()],
            metrics: vec![MetricHeader {
                name: "m".into(),
                direction: Direction::Maximize,
            }],
            cells: vec![vec![cell]],
        }
    }

    #[test]
    fn markdown_scalar_and_deviation() {
        let md = render_table(&table(CellResult::Ok(MetricValue::scalar(0.5))), TableFormat::Markdown);
        assert!(md.contains("| 0.5000 |"), "{md}");
        assert!(md.contains("m ↑"));
        let v = MetricValue::from_folds(vec![1.0, 1.0]).unwrap();
        let md = render_table(&table(CellResult::Ok(v)), TableFormat::Markdown);
        assert!(md.contains("1.0000 ± 0.0000"), "{md}");
    }

    #[test]
    fn error_cells_and_negative_zero() {
        let md = render_table(
            &table(CellResult::Error {
                message: "x".into(),
            }),
            TableFormat::Markdown,
        );
        assert!(md.contains("| ERR |"));
        assert_eq!(number(-0.00001, 4), "0.0000");
        assert_eq!(number(-0.5, 4), "-0.5000");
    }

    #[test]
    fn json_round_trip() {
        let t = table(CellResult::Ok(MetricValue::from_folds(vec![0.1, 0.7, 1.0 / 3.0]).unwrap()));
        let back: ReportTable = serde_json::from_str(&render_table(&t, TableFormat::Json)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_quotes_commas() {
        let mut t = table(CellResult::Ok(MetricValue::scalar(1.0)));
        t.groups[0] = "a,b".into();
        assert!(render_table(&t, TableFormat::Csv).contains("\"a,b\",1.0000"));
    }
}
