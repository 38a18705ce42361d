use std::collections::BTreeMap;

use crate::metrics::ResponseMatrix;
use crate::panel::{AnswerCode, Catalog};

pub const VARIABILITY_BINS: [&str; 5] = ["Low", "Medium-low", "Medium", "High", "Very high"];
pub const RARITY_BINS: [&str; 5] = ["Common", "Somewhat common", "Moderate", "Somewhat rare", "Rare"];

fn column_answers(x: &ResponseMatrix, col: usize) -> Vec<AnswerCode> {
    (0..x.n_rows()).filter_map(|r| x.get(r, col)).collect()
}

/// Shannon entropy (base 2) of an empirical answer sample.
pub fn entropy(answers: &[AnswerCode]) -> f64 {
    let mut counts: BTreeMap<AnswerCode, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(*a).or_default() += 1;
    }
    let n = answers.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Entropy of the human answers divided by log2 of the number of answer
/// options. Categorical questions use their declared categories; numeric
/// questions, having none, use the number of distinct observed values.
/// Questions with at most one option score 0. `None` without answers.
pub fn answer_variability(x: &ResponseMatrix, col: usize, catalog: &Catalog) -> Option<f64> {
    let answers = column_answers(x, col);
    if answers.is_empty() {
        return None;
    }
    let meta = catalog.get(&x.variables()[col]);
    let options = match meta {
        Some(q) if q.representation.is_categorical() => q.categories.len(),
        _ => {
            let mut distinct = answers.clone();
            distinct.sort();
            distinct.dedup();
            distinct.len()
        }
    };
    if options <= 1 {
        log::warn!("{} has a single answer option; variability set to 0", x.variables()[col]);
        return Some(0.0);
    }
    Some(entropy(&answers) / (options as f64).log2())
}

/// Per-row shares of each answer in each column, self-inclusive.
fn shares(x: &ResponseMatrix) -> Vec<BTreeMap<AnswerCode, f64>> {
    (0..x.n_cols())
        .map(|col| {
            let answers = column_answers(x, col);
            let mut counts: BTreeMap<AnswerCode, f64> = BTreeMap::new();
            for a in &answers {
                *counts.entry(*a).or_default() += 1.0;
            }
            let n = answers.len() as f64;
            counts.values_mut().for_each(|c| *c /= n);
            counts
        })
        .collect()
}

/// Mean over a respondent's answered questions of 1 − the share of
/// respondents giving the same answer (the respondent included).
pub fn answer_rarity(x: &ResponseMatrix, row: usize) -> Option<f64> {
    rarity_scores(x)[row]
}

pub fn rarity_scores(x: &ResponseMatrix) -> Vec<Option<f64>> {
    let shares = shares(x);
    (0..x.n_rows())
        .map(|row| {
            let items: Vec<f64> = (0..x.n_cols())
                .filter_map(|col| x.get(row, col).map(|a| 1.0 - shares[col][&a]))
                .collect();
            (!items.is_empty()).then(|| items.iter().sum::<f64>() / items.len() as f64)
        })
        .collect()
}

/// Five contiguous rank groups over the ascending (stable) order of
/// `scores`; sizes differ by at most one with the larger groups first.
/// Fewer than five items all land in bin 0.
pub fn bin_rank_quintiles(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    if n < 5 {
        if n > 0 {
            log::warn!("only {n} items to bin; using a single bin");
        }
        return vec![0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut bins = vec![0; n];
    let (q, r) = (n / 5, n % 5);
    let mut pos = 0;
    for bin in 0..5 {
        let size = q + usize::from(bin < r);
        for &i in &order[pos..pos + size] {
            bins[i] = bin;
        }
        pos += size;
    }
    bins
}
