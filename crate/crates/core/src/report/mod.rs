//! Rendering of report tables and charts.

mod chart;
mod table;

pub use chart::{
    bar_chart, parallel_coordinates, pca_scatter, render_chart, trajectory_chart, ChartKind, ChartSpec, ErrorBars,
};
pub use table::{render_table, render_table_with, render_trajectory, RenderOptions, TableFormat};
