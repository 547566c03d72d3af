//! Word n-gram TF-IDF with sublinear term frequency and un-smoothed idf.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::vector::SparseVector;
use super::{word_ngrams, IntentError, LabeledExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub ngram_range: (usize, usize),
    /// Terms in a larger fraction of documents than this are dropped.
    pub max_df: f64,
    /// Terms in a smaller fraction of documents than this are dropped; 0 keeps all.
    pub min_df: f64,
    pub norm: Norm,
    pub smooth_idf: bool,
    pub sublinear_tf: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self { ngram_range: (1, 2), max_df: 0.9, min_df: 0.0, norm: Norm::L1, smooth_idf: false, sublinear_tf: true }
    }
}

#[derive(Debug, Clone)]
pub struct TfidfModel {
    pub config: TfidfConfig,
    pub vocabulary: BTreeMap<String, usize>,
    pub document_frequency: Vec<usize>,
    pub idf: Vec<f64>,
    pub n_docs: usize,
    pub training_vectors: Vec<(SparseVector, String)>,
}

impl TfidfModel {
    pub fn fit(corpus: &[LabeledExample], config: TfidfConfig) -> Result<Self, IntentError> {
        if corpus.is_empty() {
            return Err(IntentError::EmptyCorpus);
        }
        let n_docs = corpus.len();
        let mut df: HashMap<String, usize> = HashMap::new();
        for ex in corpus {
            let mut grams = word_ngrams(&ex.tokens, config.ngram_range);
            grams.sort();
            grams.dedup();
            for g in grams {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let max_count = config.max_df * n_docs as f64;
        let min_count = config.min_df * n_docs as f64;
        let mut kept: Vec<(String, usize)> =
            df.into_iter().filter(|&(_, d)| d as f64 <= max_count && d as f64 >= min_count).collect();
        if kept.is_empty() {
            return Err(IntentError::EmptyVocabulary);
        }
        kept.sort();
        let n = n_docs as f64;
        let mut vocabulary = BTreeMap::new();
        let mut document_frequency = Vec::with_capacity(kept.len());
        let mut idf = Vec::with_capacity(kept.len());
        for (i, (gram, d)) in kept.into_iter().enumerate() {
            let d = d as f64;
            idf.push(if config.smooth_idf { ((1.0 + n) / (1.0 + d)).ln() + 1.0 } else { (n / d).ln() + 1.0 });
            document_frequency.push(d as usize);
            vocabulary.insert(gram, i);
        }
        let mut model = Self { config, vocabulary, document_frequency, idf, n_docs, training_vectors: Vec::new() };
        model.training_vectors = corpus.iter().map(|ex| (model.vectorize(&ex.tokens), ex.label.clone())).collect();
        Ok(model)
    }

    /// Out-of-vocabulary n-grams are ignored; an all-OOV input is the zero vector.
    pub fn vectorize(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for g in word_ngrams(tokens, self.config.ngram_range) {
            if let Some(&i) = self.vocabulary.get(&g) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let pairs = counts
            .into_iter()
            .map(|(i, c)| {
                let tf = if self.config.sublinear_tf { 1.0 + (c as f64).ln() } else { c as f64 };
                (i, tf * self.idf[i])
            })
            .collect();
        let mut v = SparseVector::from_pairs(pairs);
        let norm = match self.config.norm {
            Norm::L1 => v.l1_norm(),
            Norm::L2 => v.l2_norm(),
            Norm::None => 1.0,
        };
        if norm > 0.0 {
            v.scale(1.0 / norm);
        }
        v
    }

    pub fn weight_of(&self, vector: &SparseVector, gram: &str) -> f64 {
        self.vocabulary.get(gram).map_or(0.0, |&i| vector.get(i))
    }
}
