use std::collections::BTreeSet;

use super::MetricsError;
use crate::engine::{PredictionSet, Unit};
use crate::panel::{AnswerCode, Catalog, RespondentId, TaskSplit};

/// Respondents × target variables. A `None` cell is either an unasked
/// question (truth) or a missing prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    respondents: Vec<String>,
    variables: Vec<String>,
    cells: Vec<Option<AnswerCode>>,
}

impl ResponseMatrix {
    pub fn new(respondents: Vec<String>, variables: Vec<String>) -> Self {
        let cells = vec![None; respondents.len() * variables.len()];
        Self {
            respondents,
            variables,
            cells,
        }
    }

    pub fn respondents(&self) -> &[String] {
        &self.respondents
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn n_rows(&self) -> usize {
        self.respondents.len()
    }

    pub fn n_cols(&self) -> usize {
        self.variables.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<AnswerCode> {
        self.cells[row * self.variables.len() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<AnswerCode>) {
        let n = self.variables.len();
        self.cells[row * n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[Option<AnswerCode>] {
        let n = self.variables.len();
        &self.cells[row * n..(row + 1) * n]
    }

    pub fn row_index(&self, respondent: &str) -> Option<usize> {
        self.respondents.iter().position(|r| r == respondent)
    }

    pub fn col_index(&self, variable: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == variable)
    }

    /// The same rows restricted to `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut m = Self::new(self.respondents.clone(), cols.iter().map(|&c| self.variables[c].clone()).collect());
        for row in 0..self.n_rows() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(row, j, self.get(row, c));
            }
        }
        m
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.respondents == other.respondents && self.variables == other.variables
    }

    /// Human answers for `respondents` (sorted) over every variable any of
    /// them is asked, in catalog order.
    pub fn truth(split: &TaskSplit, respondents: &[RespondentId], catalog: &Catalog) -> Self {
        let mut ids: Vec<&RespondentId> = respondents.iter().collect();
        ids.sort();
        ids.dedup();
        let vars: BTreeSet<&str> = ids
            .iter()
            .flat_map(|id| split.targets(id).iter().map(|r| r.variable_name.as_str()))
            .collect();
        let mut variables: Vec<String> = vars.into_iter().map(str::to_string).collect();
        variables.sort_by_key(|v| catalog.position(v));
        let mut m = Self::new(ids.iter().map(|id| id.0.clone()).collect(), variables);
        for (row, id) in ids.iter().enumerate() {
            for rec in split.targets(id) {
                if let Some(col) = m.col_index(&rec.variable_name) {
                    m.set(row, col, Some(rec.answer));
                }
            }
        }
        m
    }

    /// Predictions aligned to `truth`. Respondent units map to their own
    /// row; baseline repeat `r` maps to row `r`. Absent records stay missing.
    pub fn predictions(set: &PredictionSet, truth: &ResponseMatrix) -> Result<Self, MetricsError> {
        let mut m = Self::new(truth.respondents.clone(), truth.variables.clone());
        for rec in &set.records {
            let row = match &rec.unit {
                Unit::Respondent(id) => truth.row_index(id),
                Unit::Repeat(r) => (*r < truth.n_rows()).then_some(*r),
            };
            let Some(row) = row else {
                return Err(MetricsError::Alignment(format!("prediction unit {} has no truth row", rec.unit)));
            };
            // Questions outside the truth matrix carry no signal; skip them.
            if let Some(col) = truth.col_index(&rec.variable_name) {
                m.set(row, col, rec.predicted);
            }
        }
        Ok(m)
    }
}

/// One variable's encoded value: index inside the variable's feature block
/// and the feature value.
type Cell = Option<(u32, f64)>;

/// Sparse one-hot encoding: a categorical answer is a unit indicator in its
/// variable's block, a numeric answer one feature scaled to [0, 1] by the
/// declared bounds, and a missing cell an all-zero block.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub(crate) block_sizes: Vec<usize>,
    pub(crate) rows: Vec<Vec<Cell>>,
}

impl Encoded {
    pub fn new(m: &ResponseMatrix, catalog: &Catalog) -> Result<Self, MetricsError> {
        let metas = m
            .variables
            .iter()
            .map(|v| catalog.get(v).ok_or_else(|| MetricsError::Alignment(format!("unknown variable {v}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let block_sizes = metas
            .iter()
            .map(|q| if q.representation.is_categorical() { q.categories.len() } else { 1 })
            .collect();
        let rows = (0..m.n_rows())
            .map(|r| {
                m.row(r)
                    .iter()
                    .zip(&metas)
                    .map(|(cell, q)| match cell {
                        None => None,
                        Some(AnswerCode::Category(c)) => q
                            .categories
                            .iter()
                            .position(|cat| cat.code == *c)
                            .map(|i| (i as u32, 1.0)),
                        Some(AnswerCode::Numeric(v)) => {
                            let (lo, hi) = q.numeric_bounds.unwrap_or((0.0, 1.0));
                            let scaled = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                            Some((0, scaled))
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { block_sizes, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dimension(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Dense feature vector of a row.
    pub fn dense(&self, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        let mut offset = 0;
        for (cell, size) in self.rows[row].iter().zip(&self.block_sizes) {
            if let Some((i, v)) = cell {
                out[offset + *i as usize] = *v;
            }
            offset += size;
        }
        out
    }
}

pub(crate) fn sq_dist_rows(a: &[Cell], b: &[Cell]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (None, None) => 0.0,
            (Some((_, v)), None) | (None, Some((_, v))) => v * v,
            (Some((i, u)), Some((j, v))) if i == j => (u - v) * (u - v),
            (Some((_, u)), Some((_, v))) => u * u + v * v,
        })
        .sum()
}

/// Dense symmetric matrix of squared Euclidean distances.
#[derive(Debug, Clone)]
pub(crate) struct DistMatrix {
    n: usize,
    m: usize,
    d: Vec<f64>,
}

impl DistMatrix {
    pub(crate) fn between(a: &Encoded, b: &Encoded) -> Self {
        let (n, m) = (a.n_rows(), b.n_rows());
        let mut d = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                d[i * m + j] = sq_dist_rows(&a.rows[i], &b.rows[j]);
            }
        }
        Self { n, m, d }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n);
        self.d[i * self.m + j]
    }
}
