use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{top_k, Candidate, RetrievalError, RetrievalResult, Stopwords};
use crate::panel::QuestionMeta;

/// Text embedded for a question: its label followed by its category labels.
pub fn embedding_text(meta: &QuestionMeta) -> String {
    let mut text = meta.label.clone();
    for c in &meta.categories {
        text.push(' ');
        text.push_str(&c.label);
    }
    text
}

pub trait Embedder: Send + Sync {
    /// Model identifier recorded as store provenance.
    fn model(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError>;
}

/// Deterministic feature-hashing embedder: each non-stopword token adds a
/// signed unit to one of `dimension` buckets chosen by SHA-256.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    stopwords: Stopwords,
    model: String,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            stopwords: Stopwords::default(),
            model: format!("hash-{dimension}"),
        }
    }
}

impl Embedder for HashEmbedder {
    fn model(&self) -> &str {
        &self.model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut v = vec![0.0; self.dimension];
                let lower = text.to_lowercase();
                for token in lower
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|t| t.chars().count() > 1 && !self.stopwords.contains(t))
                {
                    let h = Sha256::digest(token.as_bytes());
                    let bucket = u64::from_le_bytes(h[..8].try_into().unwrap()) as usize % self.dimension;
                    let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
                    v[bucket] += sign;
                }
                v
            })
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    model: String,
    dimension: usize,
    embeddings: BTreeMap<String, Vec<f64>>,
}

/// Unit-normalized vectors keyed by variable name.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    model: String,
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // already-unit vectors (e.g. reloaded sidecars) are kept bit-for-bit
    if norm > 0.0 && (norm - 1.0).abs() > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl EmbeddingStore {
    pub fn new(model: impl Into<String>, dimension: usize) -> Self {
        Self {
            model: model.into(),
            dimension,
            vectors: BTreeMap::new(),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Stores a normalized copy of `vector`. Zero vectors stay zero and score
    /// a cosine of 0 against everything.
    pub fn insert(&mut self, variable: impl Into<String>, vector: Vec<f64>) -> Result<(), RetrievalError> {
        let variable = variable.into();
        if vector.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                variable,
                expected: self.dimension,
                got: vector.len(),
            });
        }
        self.vectors.insert(variable, normalize(vector));
        Ok(())
    }

    pub fn get(&self, variable: &str) -> Result<&[f64], RetrievalError> {
        self.vectors
            .get(variable)
            .map(Vec::as_slice)
            .ok_or_else(|| RetrievalError::MissingEmbedding(variable.to_string()))
    }

    /// Embeds every question (in batches of 64).
    pub fn build<'a>(
        questions: impl IntoIterator<Item = &'a QuestionMeta>,
        embedder: &dyn Embedder,
    ) -> Result<Self, RetrievalError> {
        let questions: Vec<&QuestionMeta> = questions.into_iter().collect();
        let mut store: Option<Self> = None;
        for chunk in questions.chunks(64) {
            let texts: Vec<String> = chunk.iter().map(|q| embedding_text(q)).collect();
            let vectors = embedder.embed(&texts)?;
            if vectors.len() != chunk.len() {
                return Err(RetrievalError::Backend(format!(
                    "requested {} embeddings, received {}",
                    chunk.len(),
                    vectors.len()
                )));
            }
            for (q, v) in chunk.iter().zip(vectors) {
                let s = store.get_or_insert_with(|| Self::new(embedder.model(), v.len()));
                s.insert(q.variable_name.clone(), v)?;
            }
        }
        Ok(store.unwrap_or_else(|| Self::new(embedder.model(), 0)))
    }

    /// Sidecar JSON: `{"model": ..., "dimension": d, "embeddings": {variable: [..]}}`.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let sidecar = Sidecar {
            model: self.model.clone(),
            dimension: self.dimension,
            embeddings: self.vectors.clone(),
        };
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        std::fs::write(path, text).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| RetrievalError::Sidecar {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut store = Self::new(sidecar.model, sidecar.dimension);
        for (k, v) in sidecar.embeddings {
            store.insert(k, v)?;
        }
        Ok(store)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scores every candidate by its summed cosine similarity to the sub-batch
/// targets and returns the top `k`, ties in original row order.
pub fn select_topk_semantic(
    candidates: &[Candidate<'_>],
    targets: &[&QuestionMeta],
    store: &EmbeddingStore,
    k: usize,
) -> Result<RetrievalResult, RetrievalError> {
    let target_vecs: Vec<&[f64]> = targets
        .iter()
        .map(|t| store.get(&t.variable_name))
        .collect::<Result<_, _>>()?;
    let scores = candidates
        .iter()
        .map(|c| {
            let v = store.get(&c.meta.variable_name)?;
            Ok(target_vecs.iter().map(|t| dot(v, t)).sum())
        })
        .collect::<Result<Vec<f64>, RetrievalError>>()?;
    Ok(top_k(scores, k))
}
