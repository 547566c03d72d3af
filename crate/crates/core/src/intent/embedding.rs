//! Word vector table and averaged sentence embeddings.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::IntentError;

pub const DEFAULT_DIMENSION: usize = 300;

/// Token to vector map read from the plain-text format: a token followed by
/// its components, space-separated, one token per line. The dimension is
/// taken from the first vector line and enforced on the rest.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn load(path: &Path) -> Result<Self, IntentError> {
        Self::load_filtered(path, None)
    }

    /// Loads only tokens in `vocabulary` when one is given.
    pub fn load_filtered(path: &Path, vocabulary: Option<&HashSet<String>>) -> Result<Self, IntentError> {
        let file = std::fs::File::open(path).map_err(|e| IntentError::Io(format!("{}: {e}", path.display())))?;
        let reader = BufReader::new(file);
        let mut table = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| IntentError::Io(format!("{}: {e}", path.display())))?;
            let lineno = i + 1;
            let mut parts = line.split_ascii_whitespace();
            let Some(token) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            // word2vec-style "<count> <dim>" header
            if lineno == 1 && rest.len() == 1 && token.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            if table.dimension == 0 {
                if rest.is_empty() {
                    return Err(malformed(path, lineno, "vector has no components"));
                }
                table.dimension = rest.len();
            } else if rest.len() != table.dimension {
                return Err(malformed(
                    path,
                    lineno,
                    &format!("expected {} components, found {}", table.dimension, rest.len()),
                ));
            }
            if vocabulary.is_some_and(|v| !v.contains(token)) {
                continue;
            }
            let vector = rest
                .iter()
                .map(|s| s.parse::<f32>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f32>>>()
                .ok_or_else(|| malformed(path, lineno, "non-numeric component"))?;
            table.vectors.insert(token.to_string(), vector);
        }
        Ok(table)
    }

    pub fn from_vectors(vectors: impl IntoIterator<Item = (String, Vec<f32>)>) -> Result<Self, IntentError> {
        let mut table = Self::default();
        for (token, v) in vectors {
            if table.dimension == 0 {
                table.dimension = v.len();
            } else if v.len() != table.dimension {
                return Err(IntentError::DimensionMismatch { left: table.dimension, right: v.len() });
            }
            table.vectors.insert(token, v);
        }
        Ok(table)
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

    /// Exact token first, then its lowercase form.
    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).or_else(|| self.vectors.get(&token.to_lowercase())).map(Vec::as_slice)
    }
}

fn malformed(path: &Path, line: usize, reason: &str) -> IntentError {
    IntentError::Io(format!("{}:{line}: {reason}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    /// Number of tokens found in the table; zero means `vector` is all zeros.
    pub known_tokens: usize,
}

impl SentenceEmbedding {
    pub fn is_zero(&self) -> bool {
        self.known_tokens == 0
    }
}

/// Mean of the known tokens' vectors, scaled to unit length.
pub fn sentence_embedding(table: &EmbeddingTable, tokens: &[String]) -> SentenceEmbedding {
    let mut sum = vec![0.0f64; table.dimension()];
    let mut known = 0;
    for t in tokens {
        if let Some(v) = table.get(t) {
            known += 1;
            sum.iter_mut().zip(v).for_each(|(s, &x)| *s += x as f64);
        }
    }
    if known == 0 {
        return SentenceEmbedding { vector: sum, known_tokens: 0 };
    }
    sum.iter_mut().for_each(|s| *s /= known as f64);
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return SentenceEmbedding { vector: sum, known_tokens: 0 };
    }
    sum.iter_mut().for_each(|s| *s /= norm);
    SentenceEmbedding { vector: sum, known_tokens: known }
}
