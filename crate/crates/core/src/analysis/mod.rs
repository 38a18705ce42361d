//! Behavioral response features (variability, rarity), the rank-binned
//! performance heatmap, and the sliced report tables.

mod features;
mod heatmap;
mod report;

use thiserror::Error;

pub use features::{
    answer_rarity, answer_variability, bin_rank_quintiles, entropy, rarity_scores, RARITY_BINS,
    VARIABILITY_BINS,
};
pub use heatmap::{heatmap_matrix, Heatmap, HeatmapCell};
pub use report::{
    build_report, radar_scale, DomainRow, HeatmapRow, RadarRow, ReportBundle, ReportInputs,
    SettingRun, StrataRow, REPORT_FILES,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}
