use std::collections::BTreeMap;

use super::matrix::ResponseMatrix;
use crate::panel::AnswerCode;

/// Support-weighted F1 over the classes seen in truth or predictions. A
/// missing prediction is its own never-correct class, so it counts as a
/// false negative for the true class and nothing else.
pub fn weighted_f1(truth: &[AnswerCode], predicted: &[Option<AnswerCode>]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "truth and predictions must align");
    if truth.is_empty() {
        return f64::NAN;
    }
    // per class: (support, predicted count, true positives)
    let mut stats: BTreeMap<AnswerCode, (usize, usize, usize)> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        stats.entry(*t).or_default().0 += 1;
        if let Some(p) = p {
            let e = stats.entry(*p).or_default();
            e.1 += 1;
            if p == t {
                e.2 += 1;
            }
        }
    }
    let total = truth.len() as f64;
    stats
        .values()
        .filter(|(support, _, _)| *support > 0)
        .map(|&(support, pred, tp)| {
            let denom = support + pred;
            let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
            f1 * support as f64 / total
        })
        .sum()
}

/// Per-question scores with the questions that had nothing to score.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemScores {
    /// (item, score) in matrix order.
    pub scores: Vec<(String, f64)>,
    pub excluded: Vec<String>,
}

impl ItemScores {
    /// Unweighted mean over scored items (NaN when none).
    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            return f64::NAN;
        }
        self.scores.iter().map(|(_, s)| s).sum::<f64>() / self.scores.len() as f64
    }
}

/// Weighted F1 of one column over `rows` (duplicates allowed) that have a
/// truth value. `None` when no row does.
pub fn column_f1(x: &ResponseMatrix, xhat: &ResponseMatrix, col: usize, rows: &[usize]) -> Option<f64> {
    let (truth, pred): (Vec<AnswerCode>, Vec<Option<AnswerCode>>) = rows
        .iter()
        .filter_map(|&r| x.get(r, col).map(|t| (t, xhat.get(r, col))))
        .unzip();
    (!truth.is_empty()).then(|| weighted_f1(&truth, &pred))
}

pub fn weighted_f1_per_question(x: &ResponseMatrix, xhat: &ResponseMatrix, rows: &[usize]) -> ItemScores {
    let mut out = ItemScores {
        scores: Vec::new(),
        excluded: Vec::new(),
    };
    for (col, var) in x.variables().iter().enumerate() {
        match column_f1(x, xhat, col, rows) {
            Some(s) => out.scores.push((var.clone(), s)),
            None => out.excluded.push(var.clone()),
        }
    }
    out
}

/// Exact-match rate of one respondent over the targets they answered.
pub fn row_match_rate(x: &ResponseMatrix, xhat: &ResponseMatrix, row: usize) -> Option<f64> {
    let mut asked = 0usize;
    let mut hits = 0usize;
    for col in 0..x.n_cols() {
        if let Some(t) = x.get(row, col) {
            asked += 1;
            if xhat.get(row, col) == Some(t) {
                hits += 1;
            }
        }
    }
    (asked > 0).then(|| hits as f64 / asked as f64)
}

/// Match rate per respondent row (one entry per element of `rows`).
pub fn respondent_match_rate(x: &ResponseMatrix, xhat: &ResponseMatrix, rows: &[usize]) -> ItemScores {
    let mut out = ItemScores {
        scores: Vec::new(),
        excluded: Vec::new(),
    };
    for &r in rows {
        let id = x.respondents()[r].clone();
        match row_match_rate(x, xhat, r) {
            Some(s) => out.scores.push((id, s)),
            None => out.excluded.push(id),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(v: i64) -> AnswerCode {
        AnswerCode::Category(v)
    }

    #[test]
    fn single_class_prediction_on_even_split() {
        let truth = [c(1), c(1), c(2), c(2)];
        let pred = [Some(c(1)); 4];
        // class 1: P=0.5 R=1 F1=2/3; class 2: 0
        assert_abs_diff_eq!(weighted_f1(&truth, &pred), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_and_missing() {
        let truth = [c(1), c(2), c(3)];
        assert_eq!(weighted_f1(&truth, &[Some(c(1)), Some(c(2)), Some(c(3))]), 1.0);
        assert_eq!(weighted_f1(&truth, &[None, None, None]), 0.0);
        // class 1 missed only through a missing prediction: F1_1 = 0
        let f = weighted_f1(&truth, &[None, Some(c(2)), Some(c(3))]);
        assert_abs_diff_eq!(f, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn match_rate_counts_missing_as_wrong() {
        let mut x = ResponseMatrix::new(vec!["a".into()], (0..10).map(|i| format!("v{i}")).collect());
        let mut xhat = x.clone();
        for col in 0..10 {
            x.set(0, col, Some(c(1)));
            xhat.set(0, col, if col == 9 { None } else { Some(c(1)) });
        }
        assert_abs_diff_eq!(row_match_rate(&x, &xhat, 0).unwrap(), 0.9, epsilon = 1e-12);
    }
}
