//! Intent detection behind one [`IntentClassifier`] interface: TF-IDF
//! nearest example, averaged-embedding nearest example and logistic
//! regression over word and POS n-grams.

mod embedding;
mod eval;
mod logreg;
mod tfidf;
mod vector;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{normalized_words, Annotator, Tag};

pub use embedding::{sentence_embedding, EmbeddingTable, SentenceEmbedding, DEFAULT_DIMENSION};
pub use eval::{cross_validate, stratified_folds, EvalReport};
pub use logreg::{
    balanced_class_weights, feature_names, softmax, LogRegConfig, LogRegModel, LogRegObjective, LogRegPrediction,
};
pub use tfidf::{Norm, TfidfConfig, TfidfModel};
pub use vector::{cosine, Similarity, SparseVector};

#[derive(Debug, thiserror::Error)]
pub enum IntentError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("no n-gram survives the document-frequency limits")]
    EmptyVocabulary,
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no training examples to compare against")]
    NoExamples,
    #[error("training diverged to non-finite parameters")]
    Diverged,
    #[error("{0}")]
    Io(String),
    #[error("{path}:{line}: {reason}")]
    Corpus { path: String, line: usize, reason: String },
    #[error("invalid evaluation setup: {0}")]
    Evaluation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub label: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub pos_tags: Vec<Tag>,
}

impl LabeledExample {
    pub fn new(label: &str, text: &str, annotator: &dyn Annotator) -> Self {
        let tokens = annotator.tokenize(text);
        let pos_tags = annotator.pos_tag(&tokens);
        Self { label: label.to_string(), text: text.to_string(), tokens, pos_tags }
    }
}

/// Reads `label<TAB>text` rows.
pub fn load_corpus(path: &Path, annotator: &dyn Annotator) -> Result<Vec<LabeledExample>, IntentError> {
    let text = std::fs::read_to_string(path).map_err(|e| IntentError::Io(format!("{}: {e}", path.display())))?;
    parse_corpus(&text, path, annotator)
}

pub fn parse_corpus(text: &str, origin: &Path, annotator: &dyn Annotator) -> Result<Vec<LabeledExample>, IntentError> {
    crate::knowledge::data_lines(text)
        .map(|(line, raw)| {
            let (label, body) = raw
                .split_once('\t')
                .map(|(l, t)| (l.trim(), t.trim()))
                .filter(|(l, t)| !l.is_empty() && !t.is_empty())
                .ok_or_else(|| IntentError::Corpus {
                    path: origin.display().to_string(),
                    line,
                    reason: "expected label<TAB>text".into(),
                })?;
            Ok(LabeledExample::new(label, body, annotator))
        })
        .collect()
}

/// Lowercased word n-grams (punctuation dropped), joined by single spaces.
pub fn word_ngrams(tokens: &[String], range: (usize, usize)) -> Vec<String> {
    ngrams(&normalized_words(tokens), range)
}

pub fn pos_ngrams(tags: &[Tag], range: (usize, usize)) -> Vec<String> {
    let names: Vec<String> = tags.iter().map(|t| t.as_str().to_string()).collect();
    ngrams(&names, range)
}

fn ngrams(words: &[String], (lo, hi): (usize, usize)) -> Vec<String> {
    let mut out = Vec::new();
    for n in lo.max(1)..=hi {
        out.extend(words.windows(n).map(|w| w.join(" ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    /// Cosine similarity for nearest-example methods, probability for logistic regression.
    pub score: f64,
}

pub trait IntentClassifier: Send + Sync {
    fn method(&self) -> Method;
    fn classify(&self, tokens: &[String], pos_tags: &[Tag]) -> Classification;
}

/// Label of the most similar example; the earliest example wins ties.
/// A zero query returns `(fallback, 0)`.
pub fn classify_nearest<V: Similarity>(
    examples: &[(V, String)],
    query: &V,
    fallback: &str,
) -> Result<Classification, IntentError> {
    if examples.is_empty() {
        return Err(IntentError::NoExamples);
    }
    if query.is_zero() {
        return Ok(Classification { label: fallback.to_string(), score: 0.0 });
    }
    let mut best: Option<(f64, &str)> = None;
    for (v, label) in examples {
        let sim = v.cosine(query)?;
        if best.is_none_or(|(b, _)| sim > b) {
            best = Some((sim, label));
        }
    }
    let (score, label) = best.expect("non-empty");
    Ok(Classification { label: label.to_string(), score })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tfidf,
    Embedding,
    Logreg,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tfidf, Method::Embedding, Method::Logreg];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tfidf => "tfidf",
            Method::Embedding => "embedding",
            Method::Logreg => "logreg",
        }
    }

    /// Row label in evaluation reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Tfidf => "TF-IDF",
            Method::Embedding => "Embeddings",
            Method::Logreg => "Logistic regression",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected tfidf, embedding or logreg)"))
    }
}

pub struct TfidfClassifier {
    pub model: TfidfModel,
    pub fallback: String,
}

impl IntentClassifier for TfidfClassifier {
    fn method(&self) -> Method {
        Method::Tfidf
    }

    fn classify(&self, tokens: &[String], _pos_tags: &[Tag]) -> Classification {
        let q = self.model.vectorize(tokens);
        classify_nearest(&self.model.training_vectors, &q, &self.fallback)
            .unwrap_or_else(|_| Classification { label: self.fallback.clone(), score: 0.0 })
    }
}

pub struct EmbeddingClassifier {
    pub table: Arc<EmbeddingTable>,
    pub examples: Vec<(Vec<f64>, String)>,
    pub fallback: String,
}

impl EmbeddingClassifier {
    pub fn fit(table: Arc<EmbeddingTable>, corpus: &[LabeledExample], fallback: &str) -> Result<Self, IntentError> {
        if corpus.is_empty() {
            return Err(IntentError::EmptyCorpus);
        }
        let examples = corpus
            .iter()
            .map(|ex| (sentence_embedding(&table, &normalized_words(&ex.tokens)).vector, ex.label.clone()))
            .collect();
        Ok(Self { table, examples, fallback: fallback.to_string() })
    }
}

impl IntentClassifier for EmbeddingClassifier {
    fn method(&self) -> Method {
        Method::Embedding
    }

    fn classify(&self, tokens: &[String], _pos_tags: &[Tag]) -> Classification {
        let q = sentence_embedding(&self.table, &normalized_words(tokens)).vector;
        classify_nearest(&self.examples, &q, &self.fallback)
            .unwrap_or_else(|_| Classification { label: self.fallback.clone(), score: 0.0 })
    }
}

pub struct LogRegClassifier {
    pub model: LogRegModel,
}

impl IntentClassifier for LogRegClassifier {
    fn method(&self) -> Method {
        Method::Logreg
    }

    fn classify(&self, tokens: &[String], pos_tags: &[Tag]) -> Classification {
        let p = self.model.predict(tokens, pos_tags);
        let score = p.probabilities.iter().find(|(l, _)| *l == p.label).map_or(0.0, |(_, s)| *s);
        Classification { label: p.label, score }
    }
}

/// What training needs besides the labeled examples.
#[derive(Clone, Default)]
pub struct TrainingSetup {
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub tfidf: TfidfConfig,
    pub logreg: LogRegConfig,
    pub fallback: String,
}

pub fn train_classifier(
    method: Method,
    corpus: &[LabeledExample],
    setup: &TrainingSetup,
) -> Result<Box<dyn IntentClassifier>, IntentError> {
    Ok(match method {
        Method::Tfidf => Box::new(TfidfClassifier {
            model: TfidfModel::fit(corpus, setup.tfidf.clone())?,
            fallback: setup.fallback.clone(),
        }),
        Method::Embedding => {
            let table = setup
                .embeddings
                .clone()
                .ok_or_else(|| IntentError::Io("embedding method needs an embedding table".into()))?;
            Box::new(EmbeddingClassifier::fit(table, corpus, &setup.fallback)?)
        }
        Method::Logreg => Box::new(LogRegClassifier { model: LogRegModel::train(corpus, setup.logreg)? }),
    })
}
