use std::sync::Arc;

use serde::Serialize;

use super::ResponderError;
use crate::analysis::{normalized_words, tokenize};
use crate::intent::{cosine, sentence_embedding, EmbeddingTable};
use crate::rng::SplitMix64;

/// Similarities within this distance of the best count as ties.
pub const TIE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChitchatReply {
    pub response: String,
    /// Index of the matched corpus pair; `None` for a generic response.
    pub index: Option<usize>,
    pub similarity: f64,
}

/// Retrieval chit-chat: answers with the response of the most similar
/// stored message under averaged word embeddings.
pub struct ChitchatResponder {
    pub pairs: Vec<(String, String)>,
    vectors: Vec<Vec<f64>>,
    pub generic: Vec<String>,
    table: Arc<EmbeddingTable>,
}

impl ChitchatResponder {
    pub fn new(
        pairs: Vec<(String, String)>,
        generic: Vec<String>,
        table: Arc<EmbeddingTable>,
    ) -> Result<Self, ResponderError> {
        if pairs.is_empty() {
            return Err(ResponderError::EmptyCorpus("chit-chat corpus".into()));
        }
        if generic.is_empty() {
            return Err(ResponderError::EmptyCorpus("generic response list".into()));
        }
        let vectors =
            pairs.iter().map(|(m, _)| sentence_embedding(&table, &normalized_words(&tokenize(m))).vector).collect();
        Ok(Self { pairs, vectors, generic, table })
    }

    pub fn reply(&self, tokens: &[String], seed: u64) -> ChitchatReply {
        let mut rng = SplitMix64::new(seed);
        let q = sentence_embedding(&self.table, &normalized_words(tokens));
        if q.is_zero() {
            let i = rng.below(self.generic.len());
            return ChitchatReply { response: self.generic[i].clone(), index: None, similarity: 0.0 };
        }
        let sims: Vec<f64> = self.vectors.iter().map(|v| cosine(v, &q.vector).unwrap_or(0.0)).collect();
        let best = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..sims.len()).filter(|&i| best - sims[i] <= TIE_EPSILON).collect();
        let index = tied[rng.below(tied.len())];
        ChitchatReply { response: self.pairs[index].1.clone(), index: Some(index), similarity: sims[index] }
    }
}
