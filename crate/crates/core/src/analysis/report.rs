use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{answer_variability, bin_rank_quintiles, rarity_scores, RARITY_BINS, VARIABILITY_BINS};
use super::heatmap::{heatmap_matrix, Heatmap};
use super::AnalysisError;
use crate::metrics::{column_jsd, Dimension, Evaluation, MetricValue, ResponseMatrix};
use crate::panel::Catalog;
use crate::sampling::{DemographicAxis, Stratum};

/// File names of a report bundle, in write order.
pub const REPORT_FILES: [&str; 5] = [
    "fig2_domain_distances.csv",
    "fig3_heatmap.csv",
    "fig5_strata.csv",
    "radar_inputs.csv",
    "table_settings.csv",
];

/// One evaluated setting: its prediction matrix (aligned with the truth)
/// and its overall metrics.
pub struct SettingRun<'a> {
    pub setting: String,
    pub xhat: &'a ResponseMatrix,
    pub metrics: Vec<MetricValue>,
}

pub struct ReportInputs<'a> {
    pub task: String,
    pub x: &'a ResponseMatrix,
    pub catalog: &'a Catalog,
    /// Stratum of each truth row.
    pub strata: Vec<&'a Stratum>,
    pub settings: Vec<SettingRun<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub task: String,
    pub setting: String,
    pub domain: String,
    pub questions: usize,
    pub jsd: Option<f64>,
    pub mmd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub task: String,
    pub setting: String,
    pub variability_bin: String,
    pub rarity_bin: String,
    pub f1: Option<f64>,
    pub questions: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataRow {
    pub task: String,
    pub setting: String,
    pub axis: String,
    pub group: String,
    pub respondents: usize,
    pub match_rate: Option<f64>,
    pub question_f1: Option<f64>,
    pub parity_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarRow {
    pub task: String,
    pub setting: String,
    pub dimension: String,
    pub value: f64,
    /// In [0, 1], higher is better.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub domain_distances: Vec<DomainRow>,
    pub heatmap: Vec<HeatmapRow>,
    pub heatmaps: Vec<(String, Heatmap)>,
    pub strata: Vec<StrataRow>,
    pub radar: Vec<RadarRow>,
    /// (task, setting, metrics) in the layout of the per-setting summary table.
    pub settings: Vec<(String, String, Vec<MetricValue>)>,
}

/// Maps a metric onto [0, 1] with higher meaning closer to the humans:
/// F1 and match rate as they are, ARI clamped at 0, and the distances and
/// parity deviation as `1 − min(x, 1)`. NaN stays NaN.
pub fn radar_scale(dimension: Dimension, value: f64) -> f64 {
    if value.is_nan() {
        return value;
    }
    match dimension {
        Dimension::QuestionF1 | Dimension::RespondentMatch | Dimension::ClusteringAri => value.clamp(0.0, 1.0),
        Dimension::QuestionJsd | Dimension::RespondentMmd | Dimension::EquityDpi => 1.0 - value.clamp(0.0, 1.0),
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn build_report(inputs: &ReportInputs<'_>) -> Result<ReportBundle, AnalysisError> {
    let x = inputs.x;
    let task = inputs.task.clone();

    // Bins depend only on the human answers, so they are shared by settings.
    let variability: Vec<Option<f64>> = (0..x.n_cols()).map(|c| answer_variability(x, c, inputs.catalog)).collect();
    let variability_bins = bins_for(&variability);
    let rarity_bins = bins_for(&rarity_scores(x));

    let mut domains: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (c, v) in x.variables().iter().enumerate() {
        let domain = inputs.catalog.get(v).map(|q| q.domain.clone()).unwrap_or_default();
        domains.entry(domain).or_default().push(c);
    }

    let mut bundle = ReportBundle {
        domain_distances: Vec::new(),
        heatmap: Vec::new(),
        heatmaps: Vec::new(),
        strata: Vec::new(),
        radar: Vec::new(),
        settings: Vec::new(),
    };

    let mut settings: Vec<&SettingRun<'_>> = inputs.settings.iter().collect();
    settings.sort_by(|a, b| a.setting.cmp(&b.setting));
    for run in settings {
        let eval = Evaluation::new(x, run.xhat, inputs.catalog, inputs.strata.clone())?;
        let all = eval.all_rows();

        for (domain, cols) in &domains {
            let jsd: Vec<f64> = cols.iter().filter_map(|&c| column_jsd(x, run.xhat, c, &all)).collect();
            let (sx, sy) = (x.select_columns(cols), run.xhat.select_columns(cols));
            let sub = Evaluation::new(&sx, &sy, inputs.catalog, inputs.strata.clone())?;
            let mmd = sub.mmd(&all, None).ok().map(|m| m.value);
            bundle.domain_distances.push(DomainRow {
                task: task.clone(),
                setting: run.setting.clone(),
                domain: domain.clone(),
                questions: cols.len(),
                jsd: (!jsd.is_empty()).then(|| jsd.iter().sum::<f64>() / jsd.len() as f64),
                mmd,
            });
        }

        let heatmap = heatmap_matrix(x, run.xhat, &variability_bins, &rarity_bins);
        for cell in &heatmap.cells {
            bundle.heatmap.push(HeatmapRow {
                task: task.clone(),
                setting: run.setting.clone(),
                variability_bin: VARIABILITY_BINS[cell.variability_bin].to_string(),
                rarity_bin: RARITY_BINS[cell.rarity_bin].to_string(),
                f1: cell.value,
                questions: cell.questions,
                flagged: cell.value.is_none(),
            });
        }
        bundle.heatmaps.push((run.setting.clone(), heatmap));

        let overall = eval.matches(&all).mean();
        for axis in [DemographicAxis::Gender, DemographicAxis::AgeGroup, DemographicAxis::HouseholdStage] {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (r, s) in inputs.strata.iter().enumerate() {
                let label = s.axis_labels().into_iter().find(|(a, _)| *a == axis).map(|(_, l)| l).unwrap_or("");
                groups.entry(label).or_default().push(r);
            }
            for (group, rows) in groups {
                let rate = finite(eval.matches(&rows).mean());
                bundle.strata.push(StrataRow {
                    task: task.clone(),
                    setting: run.setting.clone(),
                    axis: axis.to_string(),
                    group: group.to_string(),
                    respondents: rows.len(),
                    match_rate: rate,
                    question_f1: finite(eval.f1(&rows).mean()),
                    parity_index: rate.and_then(|r| finite(r / overall)),
                });
            }
        }

        for d in Dimension::ALL {
            let value = run.metrics.iter().find(|m| m.dimension == d).map_or(f64::NAN, |m| m.value);
            bundle.radar.push(RadarRow {
                task: task.clone(),
                setting: run.setting.clone(),
                dimension: d.to_string(),
                value,
                scaled: radar_scale(d, value),
            });
        }
        bundle.settings.push((task.clone(), run.setting.clone(), run.metrics.clone()));
    }
    Ok(bundle)
}

fn bins_for(scores: &[Option<f64>]) -> Vec<Option<usize>> {
    let present: Vec<(usize, f64)> = scores.iter().enumerate().filter_map(|(i, s)| s.map(|v| (i, v))).collect();
    let bins = bin_rank_quintiles(&present.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    let mut out = vec![None; scores.len()];
    for ((i, _), b) in present.iter().zip(bins) {
        out[*i] = Some(b);
    }
    out
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), AnalysisError> {
    let err = |m: String| AnalysisError::Io { path: path.display().to_string(), message: m };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

impl ReportBundle {
    /// Writes the five tables into `dir`, plus one SVG heatmap per setting
    /// when `svg` is set.
    pub fn write(&self, dir: &Path, svg: bool) -> Result<(), AnalysisError> {
        write_rows(&dir.join(REPORT_FILES[0]), &self.domain_distances)?;
        write_rows(&dir.join(REPORT_FILES[1]), &self.heatmap)?;
        write_rows(&dir.join(REPORT_FILES[2]), &self.strata)?;
        write_rows(&dir.join(REPORT_FILES[3]), &self.radar)?;

        let path = dir.join(REPORT_FILES[4]);
        let err = |m: String| AnalysisError::Io { path: path.display().to_string(), message: m };
        let mut w = csv::Writer::from_path(&path).map_err(|e| err(e.to_string()))?;
        let mut header = vec!["task".to_string(), "setting".to_string()];
        for d in Dimension::ALL {
            header.push(d.to_string());
            header.push(format!("{d}_se"));
        }
        w.write_record(&header).map_err(|e| err(e.to_string()))?;
        for (task, setting, metrics) in &self.settings {
            let mut record = vec![task.clone(), setting.clone()];
            for d in Dimension::ALL {
                match metrics.iter().find(|m| m.dimension == d) {
                    Some(m) => {
                        record.push(m.value.to_string());
                        record.push(m.se.to_string());
                    }
                    None => record.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&record).map_err(|e| err(e.to_string()))?;
        }
        w.flush().map_err(|e| err(e.to_string()))?;

        if svg {
            for (setting, heatmap) in &self.heatmaps {
                let path = dir.join(format!("fig3_heatmap_{setting}.svg"));
                std::fs::write(&path, heatmap_svg(setting, heatmap)).map_err(|e| AnalysisError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            }
        }
        Ok(())
    }
}

/// Minimal static rendering: rows are variability bins (Low at the bottom),
/// columns rarity bins; darker means higher F1, hatched grey means empty.
pub fn heatmap_svg(title: &str, heatmap: &Heatmap) -> String {
    let (cell, left, top) = (90, 110, 40);
    let width = left + 5 * cell + 20;
    let height = top + 5 * cell + 60;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{title}: question F1 by variability x rarity</text>"#);
    for (v, name) in VARIABILITY_BINS.iter().enumerate() {
        let y = top + (4 - v) * cell;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 6, y + cell / 2, name);
        for r in 0..5 {
            let x = left + r * cell;
            let c = heatmap.cell(v, r);
            match c.value {
                Some(f1) => {
                    let shade = (255.0 * (1.0 - f1.clamp(0.0, 1.0))).round() as u8;
                    let ink = if f1 > 0.5 { "white" } else { "black" };
                    let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/>"#);
                    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{f1:.3}</text>"#, x + cell / 2, y + cell / 2);
                }
                None => {
                    let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb(221,221,221)" stroke="white"/>"#);
                    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" fill="rgb(119,119,119)">empty</text>"#, x + cell / 2, y + cell / 2);
                }
            }
        }
    }
    for (r, label) in RARITY_BINS.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, left + r * cell + cell / 2, top + 5 * cell + 18);
    }
    s.push_str("</svg>\n");
    s
}
