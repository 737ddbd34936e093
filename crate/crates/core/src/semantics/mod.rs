//! Step segmentation and text similarity.
//!
//! The default encoder is a deterministic hashed bag of tokens and character
//! trigrams, with one level of lexicon expansion. Any other encoder can be
//! plugged in through [`EmbeddingProvider`].

mod embedding;
mod segment;

use serde::{Deserialize, Serialize};

pub use embedding::{
    similarity, EmbeddingProvider, EmbeddingVector, HashedEmbedder, Lexicon, LexiconError,
    Stopwords, DEFAULT_DIMENSION,
};
pub use segment::segment_steps;

use crate::dom::NodeId;

/// One request segment, kept both verbatim and normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepText {
    pub raw: String,
    pub normalized: String,
}

impl StepText {
    /// `None` when the text normalizes to nothing.
    pub fn new(raw: &str) -> Option<Self> {
        let normalized = normalize(raw);
        if normalized.is_empty() {
            return None;
        }
        Some(Self {
            raw: raw.trim().to_string(),
            normalized,
        })
    }
}

impl std::fmt::Display for StepText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Lowercase, drop apostrophes, turn other punctuation into spaces and
/// collapse whitespace. Idempotent.
pub fn normalize(text: &str) -> String {
    let mapped: String = text
        .chars()
        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokens(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Best candidate for `query` among pre-embedded candidates, if it reaches
/// `threshold`. Ties go to the earliest candidate in slice order.
pub fn best_match_vectors(
    query: &EmbeddingVector,
    candidates: &[EmbeddingVector],
    threshold: f64,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let s = similarity(query, c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.filter(|(_, s)| *s >= threshold)
}

/// Semantic page search: the candidate node most similar to `query`, ties
/// broken by document order.
pub fn best_match(
    query: &StepText,
    candidates: &[(NodeId, String)],
    threshold: f64,
    embedder: &dyn EmbeddingProvider,
) -> Option<(NodeId, f64)> {
    let q = embedder.embed(&query.raw);
    let mut ordered: Vec<&(NodeId, String)> = candidates.iter().collect();
    ordered.sort_by_key(|(n, _)| n.preorder());
    let vecs: Vec<_> = ordered.iter().map(|(_, t)| embedder.embed(t)).collect();
    best_match_vectors(&q, &vecs, threshold).map(|(i, s)| (ordered[i].0, s))
}

#[cfg(test)]
mod tests;
