use std::collections::BTreeSet;

use super::{top_k, Candidate, RetrievalResult, Stopwords};
use crate::panel::QuestionMeta;

/// Lowercased alphanumeric tokens of a question's label and category labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSet {
    pub label: BTreeSet<String>,
    pub categories: BTreeSet<String>,
}

fn tokens(text: &str, stopwords: &Stopwords) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1 && !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

pub fn tokenize_question(meta: &QuestionMeta, stopwords: &Stopwords) -> TokenSet {
    let category_text = meta
        .categories
        .iter()
        .map(|c| c.label.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    TokenSet {
        label: tokens(&meta.label, stopwords),
        categories: tokens(&category_text, stopwords),
    }
}

/// 3 per shared label token, 1 per shared category token, +2 for the same
/// representation type and +1 for the same question type.
pub fn lexical_pair_score(
    candidate: (&TokenSet, &QuestionMeta),
    target: (&TokenSet, &QuestionMeta),
) -> u32 {
    let (ct, cm) = candidate;
    let (tt, tm) = target;
    let label = ct.label.intersection(&tt.label).count() as u32;
    let cats = ct.categories.intersection(&tt.categories).count() as u32;
    3 * label
        + cats
        + if cm.representation == tm.representation { 2 } else { 0 }
        + u32::from(cm.question_type == tm.question_type)
}

/// Scores every candidate by the sum of its pair scores over the sub-batch
/// and returns the top `k`, ties in original row order.
pub fn select_topk_lexical(
    candidates: &[Candidate<'_>],
    targets: &[&QuestionMeta],
    k: usize,
    stopwords: &Stopwords,
) -> RetrievalResult {
    let target_tokens: Vec<TokenSet> = targets.iter().map(|t| tokenize_question(t, stopwords)).collect();
    let scores = candidates
        .iter()
        .map(|c| {
            let ct = tokenize_question(c.meta, stopwords);
            targets
                .iter()
                .zip(&target_tokens)
                .map(|(tm, tt)| lexical_pair_score((&ct, c.meta), (tt, tm)) as u64)
                .sum::<u64>() as f64
        })
        .collect();
    top_k(scores, k)
}
