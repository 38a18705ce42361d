//! The six reliability dimensions, scored on aligned truth and prediction
//! matrices, with respondent-resample bootstrap standard errors.

mod accuracy;
mod bootstrap;
mod cluster;
mod distribution;
mod equity;
mod matrix;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::Catalog;
use crate::sampling::Stratum;

pub use accuracy::{column_f1, respondent_match_rate, row_match_rate, weighted_f1, weighted_f1_per_question, ItemScores};
pub use bootstrap::{bootstrap_se, resample_indices, Estimate, REDRAW_BUDGET};
pub use cluster::{adjusted_rand_index, ClusterAri, Clustering, KMEANS_RESTARTS};
pub use distribution::{column_jsd, empirical_pair, js_distance, question_jsd, MmdValue};
pub use equity::{equity_dpi_mad, EquityReport, GroupParity};
pub use matrix::{Encoded, ResponseMatrix};
pub use report::{read_metric_report, write_metric_report, MetricRow};

use matrix::DistMatrix;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("matrices do not align: {0}")]
    Alignment(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("cannot read or write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    QuestionF1,
    RespondentMatch,
    QuestionJsd,
    RespondentMmd,
    ClusteringAri,
    EquityDpi,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::QuestionF1,
        Dimension::RespondentMatch,
        Dimension::QuestionJsd,
        Dimension::RespondentMmd,
        Dimension::ClusteringAri,
        Dimension::EquityDpi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::QuestionF1 => "question_f1",
            Dimension::RespondentMatch => "respondent_match",
            Dimension::QuestionJsd => "question_jsd",
            Dimension::RespondentMmd => "respondent_mmd",
            Dimension::ClusteringAri => "clustering_ari",
            Dimension::EquityDpi => "equity_dpi",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown metric dimension `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub resamples: usize,
    /// Seeds the bootstrap resampling streams.
    pub seed: u64,
    /// Seeds k-means initialization.
    pub clustering_seed: u64,
    pub k_max: usize,
    pub restarts: usize,
    /// RBF γ; `None` uses the median heuristic.
    pub gamma: Option<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            resamples: 100,
            seed: 0,
            clustering_seed: 0,
            k_max: 7,
            restarts: KMEANS_RESTARTS,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub dimension: Dimension,
    pub value: f64,
    pub se: f64,
    pub resamples: usize,
}

/// Truth and prediction matrices with their encodings and pairwise
/// distances, prepared once and scored on any multiset of rows.
pub struct Evaluation<'a> {
    pub x: &'a ResponseMatrix,
    pub xhat: &'a ResponseMatrix,
    strata: Vec<&'a Stratum>,
    enc_x: Encoded,
    enc_y: Encoded,
    dxx: DistMatrix,
    dyy: DistMatrix,
    dxy: DistMatrix,
}

impl<'a> Evaluation<'a> {
    /// `strata[i]` is the stratum of row i.
    pub fn new(
        x: &'a ResponseMatrix,
        xhat: &'a ResponseMatrix,
        catalog: &Catalog,
        strata: Vec<&'a Stratum>,
    ) -> Result<Self, MetricsError> {
        if !x.same_shape(xhat) {
            return Err(MetricsError::Alignment("truth and predictions differ in rows or columns".into()));
        }
        if strata.len() != x.n_rows() {
            return Err(MetricsError::Alignment(format!(
                "{} strata for {} respondents",
                strata.len(),
                x.n_rows()
            )));
        }
        let enc_x = Encoded::new(x, catalog)?;
        let enc_y = Encoded::new(xhat, catalog)?;
        Ok(Self {
            dxx: DistMatrix::between(&enc_x, &enc_x),
            dyy: DistMatrix::between(&enc_y, &enc_y),
            dxy: DistMatrix::between(&enc_x, &enc_y),
            x,
            xhat,
            strata,
            enc_x,
            enc_y,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).collect()
    }

    pub fn f1(&self, rows: &[usize]) -> ItemScores {
        weighted_f1_per_question(self.x, self.xhat, rows)
    }

    pub fn matches(&self, rows: &[usize]) -> ItemScores {
        respondent_match_rate(self.x, self.xhat, rows)
    }

    pub fn jsd(&self, rows: &[usize]) -> ItemScores {
        question_jsd(self.x, self.xhat, rows)
    }

    pub fn mmd(&self, rows: &[usize], gamma: Option<f64>) -> Result<MmdValue, MetricsError> {
        distribution::mmd_rows(&self.dxx, &self.dyy, &self.dxy, rows, gamma)
    }

    pub fn ari(&self, rows: &[usize], k_max: usize, seed: u64, restarts: usize) -> ClusterAri {
        cluster::cluster_ari_rows(&self.enc_x, &self.dxx, &self.enc_y, &self.dyy, rows, k_max, seed, restarts)
    }

    /// Clustering of the truth (or prediction) rows alone.
    pub fn clustering(&self, rows: &[usize], predicted: bool, k_max: usize, seed: u64, restarts: usize) -> Clustering {
        if predicted {
            cluster::select_clustering(&self.enc_y, &self.dyy, rows, k_max, seed, restarts)
        } else {
            cluster::select_clustering(&self.enc_x, &self.dxx, rows, k_max, seed, restarts)
        }
    }

    pub fn equity(&self, rows: &[usize]) -> Result<EquityReport, MetricsError> {
        let (acc, strata): (Vec<f64>, Vec<&Stratum>) = rows
            .iter()
            .filter_map(|&r| row_match_rate(self.x, self.xhat, r).map(|a| (a, self.strata[r])))
            .unzip();
        equity_dpi_mad(&acc, &strata)
    }

    /// One dimension on one multiset of rows; `None` if undefined there.
    pub fn dimension_value(&self, dimension: Dimension, rows: &[usize], config: &MetricsConfig) -> Option<f64> {
        let finite = |v: f64| v.is_finite().then_some(v);
        match dimension {
            Dimension::QuestionF1 => finite(self.f1(rows).mean()),
            Dimension::RespondentMatch => finite(self.matches(rows).mean()),
            Dimension::QuestionJsd => finite(self.jsd(rows).mean()),
            Dimension::RespondentMmd => self.mmd(rows, config.gamma).ok().map(|m| m.value),
            Dimension::ClusteringAri => {
                if rows.len() < 3 {
                    return None;
                }
                Some(self.ari(rows, config.k_max, config.clustering_seed, config.restarts).value)
            }
            Dimension::EquityDpi => self.equity(rows).ok().map(|e| e.value),
        }
    }

    /// Point value and bootstrap SE of one dimension.
    pub fn estimate(&self, dimension: Dimension, config: &MetricsConfig) -> Result<MetricValue, MetricsError> {
        let seed = crate::util::derive_seed(config.seed, &[dimension.as_str()]);
        let e = bootstrap_se(self.n_rows(), config.resamples, seed, |rows| {
            self.dimension_value(dimension, rows, config)
        })
        .map_err(|e| MetricsError::Undefined(format!("{dimension}: {e}")))?;
        Ok(MetricValue {
            dimension,
            value: e.value,
            se: e.se,
            resamples: e.resamples,
        })
    }

    /// All six dimensions. A dimension undefined on the full sample is
    /// reported as NaN with SE NaN rather than aborting the others.
    pub fn evaluate(&self, config: &MetricsConfig) -> Vec<MetricValue> {
        let all = self.all_rows();
        if let Some(true) = (self.n_rows() >= 3).then(|| self.ari(&all, config.k_max, config.clustering_seed, config.restarts).degenerate) {
            log::warn!("clustering is ill-posed on this sample (identical rows); ARI is flagged");
        }
        Dimension::ALL
            .into_iter()
            .map(|d| {
                self.estimate(d, config).unwrap_or_else(|e| {
                    log::warn!("{e}");
                    MetricValue {
                        dimension: d,
                        value: f64::NAN,
                        se: f64::NAN,
                        resamples: 0,
                    }
                })
            })
            .collect()
    }
}
