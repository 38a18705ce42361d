use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// One line of a metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: String,
    pub setting: String,
    pub dimension: String,
    /// `all`, or a named slice such as `domain=Health`.
    pub slice: String,
    pub value: f64,
    /// Empty when no bootstrap was run for the row.
    pub se: Option<f64>,
    pub resamples: usize,
}

pub fn write_metric_report(path: &Path, rows: &[MetricRow]) -> Result<(), MetricsError> {
    let err = |e: csv::Error| MetricsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_metric_report(path: &Path) -> Result<Vec<MetricRow>, MetricsError> {
    let err = |e: csv::Error| MetricsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    csv::Reader::from_path(path)
        .map_err(err)?
        .deserialize()
        .collect::<Result<Vec<MetricRow>, _>>()
        .map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let rows = vec![
            MetricRow {
                task: "core_prediction".into(),
                setting: "profile".into(),
                dimension: "question_f1".into(),
                slice: "all".into(),
                value: 0.25,
                se: Some(0.01),
                resamples: 100,
            },
            MetricRow {
                task: "core_prediction".into(),
                setting: "profile".into(),
                dimension: "question_jsd".into(),
                slice: "domain=Health".into(),
                value: 0.5,
                se: None,
                resamples: 0,
            },
        ];
        write_metric_report(&path, &rows).unwrap();
        assert_eq!(read_metric_report(&path).unwrap(), rows);
    }
}
