use std::collections::BTreeMap;

use super::accuracy::ItemScores;
use super::matrix::{DistMatrix, ResponseMatrix};
use super::MetricsError;
use crate::panel::AnswerCode;

/// Jensen–Shannon distance with base-2 logs, in [0, 1]. Inputs are
/// probability vectors over a shared support.
pub fn js_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a support");
    let kl = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * kl(a, m) + 0.5 * kl(b, m)
        })
        .sum();
    js.clamp(0.0, 1.0).sqrt()
}

/// Empirical distributions of two samples over their joint observed support.
pub fn empirical_pair(a: &[AnswerCode], b: &[AnswerCode]) -> (Vec<f64>, Vec<f64>) {
    let mut counts: BTreeMap<AnswerCode, (f64, f64)> = BTreeMap::new();
    for x in a {
        counts.entry(*x).or_default().0 += 1.0;
    }
    for x in b {
        counts.entry(*x).or_default().1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    counts.values().map(|(ca, cb)| (ca / na, cb / nb)).unzip()
}

/// JS distance of one column over `rows` with a truth value; missing
/// predictions carry no mass. `None` if either side is empty.
pub fn column_jsd(x: &ResponseMatrix, xhat: &ResponseMatrix, col: usize, rows: &[usize]) -> Option<f64> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for &r in rows {
        if let Some(t) = x.get(r, col) {
            truth.push(t);
            if let Some(p) = xhat.get(r, col) {
                pred.push(p);
            }
        }
    }
    if truth.is_empty() || pred.is_empty() {
        return None;
    }
    let (p, q) = empirical_pair(&truth, &pred);
    Some(js_distance(&p, &q))
}

pub fn question_jsd(x: &ResponseMatrix, xhat: &ResponseMatrix, rows: &[usize]) -> ItemScores {
    let mut out = ItemScores {
        scores: Vec::new(),
        excluded: Vec::new(),
    };
    for (col, var) in x.variables().iter().enumerate() {
        match column_jsd(x, xhat, col, rows) {
            Some(s) => out.scores.push((var.clone(), s)),
            None => out.excluded.push(var.clone()),
        }
    }
    out
}

/// Median of a non-empty sample (mean of the two middle values for even n).
pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// `1 / median` of all pairwise squared distances in the pooled sample
/// (each unordered pair once), or 1 when that median is 0.
pub(crate) fn median_heuristic_gamma(dxx: &DistMatrix, dyy: &DistMatrix, dxy: &DistMatrix, rows: &[usize]) -> f64 {
    let n = rows.len();
    let mut pooled = Vec::with_capacity(n * (n - 1) + n * n);
    for a in 0..n {
        for b in a + 1..n {
            pooled.push(dxx.get(rows[a], rows[b]));
            pooled.push(dyy.get(rows[a], rows[b]));
        }
        for b in 0..n {
            pooled.push(dxy.get(rows[a], rows[b]));
        }
    }
    let med = median(pooled);
    if med > 0.0 {
        1.0 / med
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdValue {
    pub value: f64,
    pub gamma: f64,
}

/// `sqrt(½(E k(x,x′) + E k(x̂,x̂′) − 2 E k(x,x̂)))` with an RBF kernel and
/// the biased (self-pairs included) estimator, over the given rows.
pub(crate) fn mmd_rows(
    dxx: &DistMatrix,
    dyy: &DistMatrix,
    dxy: &DistMatrix,
    rows: &[usize],
    gamma: Option<f64>,
) -> Result<MmdValue, MetricsError> {
    let n = rows.len();
    if n < 2 {
        return Err(MetricsError::Undefined("MMD needs at least 2 respondents".into()));
    }
    let gamma = gamma.unwrap_or_else(|| median_heuristic_gamma(dxx, dyy, dxy, rows));
    let (mut kxx, mut kyy, mut kxy) = (0.0, 0.0, 0.0);
    for &a in rows {
        for &b in rows {
            kxx += (-gamma * dxx.get(a, b)).exp();
            kyy += (-gamma * dyy.get(a, b)).exp();
            kxy += (-gamma * dxy.get(a, b)).exp();
        }
    }
    let nn = (n * n) as f64;
    let sq = 0.5 * (kxx / nn + kyy / nn - 2.0 * kxy / nn);
    Ok(MmdValue {
        value: sq.max(0.0).sqrt(),
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_values() {
        assert_eq!(js_distance(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert_abs_diff_eq!(js_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(js_distance(&[0.5, 0.5], &[1.0, 0.0]), 0.5579, epsilon = 1e-4);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
