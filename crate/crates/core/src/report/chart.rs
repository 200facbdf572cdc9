//! Standalone SVG charts. Coordinates are printed with two decimals so the
//! output is byte-stable.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::diagnostics::PcaProjection;
use crate::engine::{MetricValue, ReportTable, Trajectory};
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const MARGIN: f64 = 40.0;
const LEGEND_H: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartKind {
    Bar,
    ParallelCoordinates,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorBars {
    #[default]
    Deviation,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    /// Metric names to plot; empty selects all.
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub error_bars: ErrorBars,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
}

fn default_width() -> u32 {
    640
}

fn default_height() -> u32 {
    400
}

impl ChartSpec {
    pub fn new(kind: ChartKind) -> Self {
        ChartSpec {
            kind,
            metrics: Vec::new(),
            error_bars: ErrorBars::Deviation,
            width: default_width(),
            height: default_height(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Svg {
    out: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: u32, height: u32) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
        )
        .unwrap();
        Svg {
            out,
            width: f64::from(width),
            height: f64::from(height),
        }
    }

    fn axis(&mut self, x1: f64, y1: f64, x2: f64, y2: f64) {
        writeln!(
            self.out,
            r##"<line class="axis" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#333"/>"##
        )
        .unwrap();
    }

    fn whisker(&mut self, x: f64, y1: f64, y2: f64) {
        writeln!(
            self.out,
            r##"<line class="error-bar" x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{y2:.2}" stroke="#000"/>"##
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        )
        .unwrap();
    }

    fn circle(&mut self, class: &str, x: f64, y: f64, r: f64, color: &str) {
        writeln!(
            self.out,
            r#"<circle class="{class}" cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{color}"/>"#
        )
        .unwrap();
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.out,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }

    /// Legend entries along the bottom edge, drawn as circles.
    fn legend(&mut self, names: &[String]) {
        let y = self.height - LEGEND_H / 2.0;
        let step = (self.width - 2.0 * MARGIN) / names.len().max(1) as f64;
        for (i, name) in names.iter().enumerate() {
            let x = MARGIN + step * i as f64;
            self.circle("legend", x + 5.0, y - 4.0, 5.0, PALETTE[i % PALETTE.len()]);
            self.text(x + 14.0, y, "start", name);
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn select_metrics(names: &[&str], wanted: &[String]) -> Result<Vec<usize>> {
    let picked: Vec<usize> = if wanted.is_empty() {
        (0..names.len()).collect()
    } else {
        wanted
            .iter()
            .map(|w| {
                names
                    .iter()
                    .position(|n| n == w)
                    .ok_or_else(|| Error::InvalidParameter(format!("chart selects unknown metric `{w}`")))
            })
            .collect::<Result<_>>()?
    };
    if picked.is_empty() {
        return Err(Error::InvalidParameter("chart selection is empty".into()));
    }
    Ok(picked)
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn deviation(v: &MetricValue, bars: ErrorBars) -> f64 {
    match bars {
        ErrorBars::Deviation => v.deviation.unwrap_or(0.0),
        ErrorBars::None => 0.0,
    }
}

pub fn render_chart(report: &ReportTable, spec: &ChartSpec) -> Result<String> {
    match spec.kind {
        ChartKind::Bar => bar_chart(report, spec),
        ChartKind::ParallelCoordinates => parallel_coordinates(report, spec),
        ChartKind::Trajectory => Err(Error::InvalidParameter(
            "trajectory charts are drawn from a trajectory, not a single report".into(),
        )),
    }
}

/// One panel per metric with a bar per group; heights are proportional to
/// the values, measured from a zero baseline.
pub fn bar_chart(report: &ReportTable, spec: &ChartSpec) -> Result<String> {
    let names: Vec<&str> = report.metrics.iter().map(|m| m.name.as_str()).collect();
    let picked = select_metrics(&names, &spec.metrics)?;
    let mut svg = Svg::new(spec.width, spec.height);
    let panel_w = (svg.width - 2.0 * MARGIN) / picked.len() as f64;
    let (top, bottom) = (MARGIN, svg.height - MARGIN - LEGEND_H);
    let groups = report.groups.len().max(1);

    for (p, &m) in picked.iter().enumerate() {
        let x0 = MARGIN + panel_w * p as f64;
        let values: Vec<Option<&MetricValue>> = report.cells.iter().map(|row| row[m].value()).collect();
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in values.iter().flatten() {
            let d = deviation(v, spec.error_bars);
            lo = lo.min(v.value - d);
            hi = hi.max(v.value + d);
        }
        let (lo, hi) = span(lo, hi);
        let y = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);
        let header = &report.metrics[m];
        svg.text(x0 + panel_w / 2.0, top - 12.0, "middle", &format!("{} {}", header.name, header.direction.arrow()));
        svg.axis(x0 + 4.0, y(0.0), x0 + panel_w - 4.0, y(0.0));
        let slot = (panel_w - 8.0) / groups as f64;
        for (g, v) in values.iter().enumerate() {
            let cx = x0 + 4.0 + slot * (g as f64 + 0.5);
            let Some(v) = v else {
                svg.text(cx, y(0.0) - 4.0, "middle", "ERR");
                continue;
            };
            let (ya, yb) = (y(v.value).min(y(0.0)), y(v.value).max(y(0.0)));
            writeln!(
                svg.out,
                r#"<rect class="bar" x="{:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cx - slot * 0.35,
                slot * 0.7,
                yb - ya,
                PALETTE[g % PALETTE.len()]
            )
            .unwrap();
            let d = deviation(v, spec.error_bars);
            if d > 0.0 {
                svg.whisker(cx, y(v.value - d), y(v.value + d));
            }
        }
    }
    svg.legend(&report.groups);
    Ok(svg.finish())
}

/// One vertical axis per metric, each min-max scaled over the groups, and
/// one polyline per group. Error cells leave a gap in the line.
pub fn parallel_coordinates(report: &ReportTable, spec: &ChartSpec) -> Result<String> {
    let names: Vec<&str> = report.metrics.iter().map(|m| m.name.as_str()).collect();
    let picked = select_metrics(&names, &spec.metrics)?;
    let mut svg = Svg::new(spec.width, spec.height);
    let (top, bottom) = (MARGIN, svg.height - MARGIN - LEGEND_H);
    let step = if picked.len() > 1 {
        (svg.width - 2.0 * MARGIN) / (picked.len() - 1) as f64
    } else {
        0.0
    };
    let (count, mid) = (picked.len(), svg.width / 2.0);
    let x_of = |a: usize| if count > 1 { MARGIN + step * a as f64 } else { mid };

    let mut scales = Vec::new();
    for (a, &m) in picked.iter().enumerate() {
        let vals: Vec<f64> = report.cells.iter().filter_map(|r| r[m].value().map(|v| v.value)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if vals.is_empty() { (0.0, 1.0) } else { span(lo, hi) };
        scales.push((lo, hi));
        let x = x_of(a);
        let header = &report.metrics[m];
        svg.axis(x, top, x, bottom);
        svg.text(x, top - 12.0, "middle", &format!("{} {}", header.name, header.direction.arrow()));
        svg.text(x, top - 2.0, "middle", &format!("{hi:.4}"));
        svg.text(x, bottom + 12.0, "middle", &format!("{lo:.4}"));
    }
    for (g, row) in report.cells.iter().enumerate() {
        let points: Vec<(f64, f64)> = picked
            .iter()
            .enumerate()
            .filter_map(|(a, &m)| {
                let v = row[m].value()?.value;
                let (lo, hi) = scales[a];
                Some((x_of(a), bottom - (v - lo) / (hi - lo) * (bottom - top)))
            })
            .collect();
        svg.polyline(&points, PALETTE[g % PALETTE.len()]);
    }
    svg.legend(&report.groups);
    Ok(svg.finish())
}

/// One panel per metric, x = iteration index, one polyline per group.
pub fn trajectory_chart(trajectory: &Trajectory, spec: &ChartSpec) -> Result<String> {
    let Some(first) = trajectory.tables.first() else {
        return Err(Error::InvalidParameter("trajectory is empty".into()));
    };
    let names: Vec<&str> = first.metrics.iter().map(|m| m.name.as_str()).collect();
    let picked = select_metrics(&names, &spec.metrics)?;
    let groups = first.groups.clone();
    let mut svg = Svg::new(spec.width, spec.height);
    let panel_w = (svg.width - 2.0 * MARGIN) / picked.len() as f64;
    let (top, bottom) = (MARGIN, svg.height - MARGIN - LEGEND_H);
    let (i_lo, i_hi) = (
        *trajectory.iterations.first().expect("non-empty") as f64,
        *trajectory.iterations.last().expect("non-empty") as f64,
    );

    for (p, &m) in picked.iter().enumerate() {
        let name = names[m];
        let x0 = MARGIN + panel_w * p as f64 + 8.0;
        let x1 = x0 + panel_w - 16.0;
        let series: Vec<Vec<(u64, MetricValue)>> = groups
            .iter()
            .map(|g| {
                trajectory
                    .iterations
                    .iter()
                    .zip(&trajectory.tables)
                    .filter_map(|(&i, t)| Some((i, t.cell(g, name)?.value()?.clone())))
                    .collect()
            })
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, v) in series.iter().flatten() {
            let d = deviation(v, spec.error_bars);
            lo = lo.min(v.value - d);
            hi = hi.max(v.value + d);
        }
        let (lo, hi) = if lo.is_finite() { span(lo, hi) } else { (0.0, 1.0) };
        let y = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);
        let x = |i: u64| {
            if i_hi > i_lo {
                x0 + (i as f64 - i_lo) / (i_hi - i_lo) * (x1 - x0)
            } else {
                (x0 + x1) / 2.0
            }
        };
        svg.axis(x0, bottom, x1, bottom);
        svg.axis(x0, top, x0, bottom);
        svg.text((x0 + x1) / 2.0, top - 12.0, "middle", &format!("{name} {}", first.metrics[m].direction.arrow()));
        svg.text(x0 - 2.0, top + 4.0, "end", &format!("{hi:.2}"));
        svg.text(x0 - 2.0, bottom, "end", &format!("{lo:.2}"));
        for &i in &trajectory.iterations {
            svg.text(x(i), bottom + 12.0, "middle", &i.to_string());
        }
        for (g, s) in series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = s.iter().map(|(i, v)| (x(*i), y(v.value))).collect();
            svg.polyline(&pts, PALETTE[g % PALETTE.len()]);
            for (i, v) in s {
                let d = deviation(v, spec.error_bars);
                if d > 0.0 {
                    svg.whisker(x(*i), y(v.value - d), y(v.value + d));
                }
            }
        }
    }
    svg.legend(&groups);
    Ok(svg.finish())
}

/// Scatter of the first two principal components, one circle per point,
/// coloured by label.
pub fn pca_scatter(projection: &PcaProjection, labels: Option<&[String]>, width: u32, height: u32) -> Result<String> {
    if projection.coords.is_empty() {
        return Err(Error::Empty("PCA projection has no points"));
    }
    if let Some(l) = labels {
        if l.len() != projection.coords.len() {
            return Err(Error::RowMismatch {
                source_id: "labels".into(),
                expected: projection.coords.len(),
                got: l.len(),
            });
        }
    }
    let mut classes: Vec<&str> = Vec::new();
    if let Some(l) = labels {
        for s in l {
            if !classes.contains(&s.as_str()) {
                classes.push(s);
            }
        }
    }
    let mut svg = Svg::new(width, height);
    let (top, bottom) = (MARGIN, svg.height - MARGIN - LEGEND_H);
    let (left, right) = (MARGIN, svg.width - MARGIN);
    let coord = |p: &Vec<f64>, j: usize| p.get(j).copied().unwrap_or(0.0);
    let bounds = |j: usize| {
        let lo = projection.coords.iter().map(|p| coord(p, j)).fold(f64::INFINITY, f64::min);
        let hi = projection.coords.iter().map(|p| coord(p, j)).fold(f64::NEG_INFINITY, f64::max);
        span(lo, hi)
    };
    let ((xl, xh), (yl, yh)) = (bounds(0), bounds(1));
    svg.axis(left, bottom, right, bottom);
    svg.axis(left, top, left, bottom);
    let pct = |j: usize| projection.explained.get(j).map_or(0.0, |e| e * 100.0);
    svg.text((left + right) / 2.0, bottom + 14.0, "middle", &format!("PC1 ({:.1}%)", pct(0)));
    svg.text(left, top - 8.0, "start", &format!("PC2 ({:.1}%)", pct(1)));
    if let Some(w) = &projection.warning {
        svg.text(right, top - 8.0, "end", w);
    }
    for (i, p) in projection.coords.iter().enumerate() {
        let cx = left + (coord(p, 0) - xl) / (xh - xl) * (right - left);
        let cy = bottom - (coord(p, 1) - yl) / (yh - yl) * (bottom - top);
        let c = labels
            .and_then(|l| classes.iter().position(|&k| k == l[i]))
            .unwrap_or(0);
        svg.circle("point", cx, cy, 3.0, PALETTE[c % PALETTE.len()]);
    }
    let out = svg.finish();
    if classes.is_empty() {
        return Ok(out);
    }
    // legend entries are text only, so circle counts stay equal to n
    let mut legend = String::new();
    let step = (f64::from(width) - 2.0 * MARGIN) / classes.len() as f64;
    for (i, c) in classes.iter().enumerate() {
        writeln!(
            legend,
            r#"<text x="{:.2}" y="{:.2}" fill="{}">{}</text>"#,
            MARGIN + step * i as f64,
            f64::from(height) - LEGEND_H / 2.0,
            PALETTE[i % PALETTE.len()],
            escape(c)
        )
        .unwrap();
    }
    Ok(out.replace("</svg>\n", &format!("{legend}</svg>\n")))
}
