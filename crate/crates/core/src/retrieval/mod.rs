//! Top-K selection of a respondent's prior answered rows for a prediction
//! sub-batch, by lexical overlap or by summed embedding cosine similarity.

mod embedding;
mod lexical;

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::panel::{AnswerRecord, QuestionMeta};

pub use embedding::{select_topk_semantic, Embedder, EmbeddingStore, HashEmbedder};
pub use lexical::{lexical_pair_score, select_topk_lexical, tokenize_question, TokenSet};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("no embedding for variable `{0}`")]
    MissingEmbedding(String),
    #[error("embedding for `{variable}` has dimension {got}, expected {expected}")]
    DimensionMismatch {
        variable: String,
        expected: usize,
        got: usize,
    },
    #[error("stopword list must have exactly 40 entries, found {0}")]
    StopwordCount(usize),
    #[error("embedding backend failed: {0}")]
    Backend(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed embedding sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
}

const DEFAULT_STOPWORDS: &str = include_str!("../../assets/stopwords.txt");

/// Fixed list of 40 function words removed before lexical scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Result<Self, RetrievalError> {
        let words: Vec<String> = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        if words.len() != 40 {
            return Err(RetrievalError::StopwordCount(words.len()));
        }
        Ok(Self(words.into_iter().collect()))
    }

    pub fn from_file(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS).expect("shipped stopword list has 40 entries")
    }
}

/// A prior answered row offered to the retriever.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub record: &'a AnswerRecord,
    pub meta: &'a QuestionMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    /// Index into the candidate slice.
    pub index: usize,
    pub score: f64,
}

/// Selected candidates, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub selected: Vec<Scored>,
    pub k: usize,
}

impl RetrievalResult {
    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.index).collect()
    }
}

/// Sorts descending by score with ties in input order, keeps the first `k`.
pub(crate) fn top_k(scores: Vec<f64>, k: usize) -> RetrievalResult {
    let mut scored: Vec<Scored> = scores
        .into_iter()
        .enumerate()
        .map(|(index, score)| Scored { index, score })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored.truncate(k);
    RetrievalResult { selected: scored, k }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_stopwords_are_forty() {
        let s = Stopwords::default();
        assert!(s.contains("how") && s.contains("are") && s.contains("you"));
        assert!(matches!(Stopwords::parse("a\nb\n"), Err(RetrievalError::StopwordCount(2))));
    }

    #[test]
    fn top_k_is_stable_on_ties() {
        let r = top_k(vec![1.0, 3.0, 3.0, 2.0, 3.0], 3);
        assert_eq!(r.indices(), vec![1, 2, 4]);
        assert_eq!(top_k(vec![5.0], 10).indices(), vec![0]);
    }
}
