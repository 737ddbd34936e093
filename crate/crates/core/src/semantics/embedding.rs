use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokens;

pub const DEFAULT_DIMENSION: usize = 256;

const TOKEN_WEIGHT: f64 = 1.0;
const TRIGRAM_WEIGHT: f64 = 0.3;

static BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: expected `token: expansion, ...`")]
    Syntax { line: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Fixed English stopword list, one token per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }
}

/// Token → expansion tokens. Expansion is applied one level deep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon(BTreeMap<String, Vec<String>>);

impl Lexicon {
    /// Parse `token: expansion1, expansion2` lines. Blank lines and `#`
    /// comments are ignored; repeated keys accumulate.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or(LexiconError::Syntax { line: i + 1 })?;
            let key = super::normalize(key);
            if key.is_empty() || key.contains(' ') {
                return Err(LexiconError::Syntax { line: i + 1 });
            }
            let entry = map.entry(key).or_default();
            for exp in rest.split(',') {
                entry.extend(tokens(exp));
            }
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn expansions(&self, token: &str) -> &[String] {
        self.0.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    components: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Self {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self { components, norm }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.components.iter().map(|x| x * c).collect())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (a.norm * b.norm)).clamp(-1.0, 1.0)
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Deterministic hashed token + trigram encoder.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
    lexicon: Lexicon,
    stopwords: Stopwords,
}

impl HashedEmbedder {
    pub fn new(lexicon: Lexicon) -> Self {
        Self::with_dimension(lexicon, DEFAULT_DIMENSION)
    }

    pub fn with_dimension(lexicon: Lexicon, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            lexicon,
            stopwords: Stopwords::default(),
        }
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Content tokens after stopword removal and lexicon expansion.
    pub fn expanded_tokens(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for t in tokens(text) {
            if self.stopwords.contains(&t) {
                continue;
            }
            out.extend(self.lexicon.expansions(&t).iter().cloned());
            out.push(t);
        }
        out
    }

    fn bucket(&self, kind: u8, s: &str) -> usize {
        (fnv1a(kind, s.as_bytes()) % self.dim as u64) as usize
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim];
        for tok in self.expanded_tokens(text) {
            v[self.bucket(b't', &tok)] += TOKEN_WEIGHT;
            let chars: Vec<char> = tok.chars().collect();
            for w in chars.windows(3) {
                let tri: String = w.iter().collect();
                v[self.bucket(b'g', &tri)] += TRIGRAM_WEIGHT;
            }
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in &mut v {
                *c /= norm;
            }
        }
        EmbeddingVector::new(v)
    }
}

// 64-bit FNV-1a with a one-byte namespace prefix separating tokens from trigrams.
fn fnv1a(kind: u8, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in std::iter::once(&kind).chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
