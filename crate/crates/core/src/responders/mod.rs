//! Response producers that do not run a dialogue graph.

mod chitchat;
mod factoid;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::Annotator;
use crate::intent::{IntentError, LabeledExample, Similarity, TfidfConfig, TfidfModel};
use crate::knowledge::data_lines;

pub use chitchat::{ChitchatReply, ChitchatResponder};
pub use factoid::{factoid_answer, FactAnswer};

pub const DEFAULT_HANDCRAFTED_THRESHOLD: f64 = 0.3;
pub const DEFAULT_QA_THRESHOLD: f64 = 0.4;

#[derive(Debug, thiserror::Error)]
pub enum ResponderError {
    #[error("{}:{line}: {reason}", path.display())]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is empty")]
    EmptyCorpus(String),
    #[error(transparent)]
    Model(#[from] IntentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Personal,
    Opinion,
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "personal" => Ok(Category::Personal),
            "opinion" => Ok(Category::Opinion),
            _ => Err(format!("unknown category {s:?} (expected personal or opinion)")),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Personal => "personal",
            Category::Opinion => "opinion",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandcraftedEntry {
    pub category: Category,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    pub source: Option<String>,
}

fn read(path: &Path) -> Result<String, ResponderError> {
    std::fs::read_to_string(path).map_err(|source| ResponderError::Io { path: path.to_path_buf(), source })
}

fn columns<'a>(path: &Path, line: usize, raw: &'a str, min: usize, max: usize) -> Result<Vec<&'a str>, ResponderError> {
    let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
    let malformed = |reason: String| ResponderError::Malformed { path: path.to_path_buf(), line, reason };
    if cols.len() < min || cols.len() > max {
        return Err(malformed(format!("expected {min}..={max} tab-separated columns, found {}", cols.len())));
    }
    if let Some(i) = cols.iter().take(min).position(|c| c.is_empty()) {
        return Err(malformed(format!("column {} is empty", i + 1)));
    }
    Ok(cols)
}

/// `category<TAB>prompt<TAB>response`
pub fn load_handcrafted(path: &Path) -> Result<Vec<HandcraftedEntry>, ResponderError> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, raw) in data_lines(&text) {
        let c = columns(path, line, raw, 3, 3)?;
        let category =
            c[0].parse().map_err(|reason| ResponderError::Malformed { path: path.to_path_buf(), line, reason })?;
        out.push(HandcraftedEntry { category, prompt: c[1].into(), response: c[2].into() });
    }
    Ok(out)
}

/// `message<TAB>response`
pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>, ResponderError> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(line, raw)| columns(path, line, raw, 2, 2).map(|c| (c[0].to_string(), c[1].to_string())))
        .collect()
}

/// `question<TAB>answer[<TAB>source]`
pub fn load_qa(path: &Path) -> Result<Vec<QaPair>, ResponderError> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(line, raw)| {
            columns(path, line, raw, 2, 3).map(|c| QaPair {
                question: c[0].into(),
                answer: c[1].into(),
                source: c.get(2).filter(|s| !s.is_empty()).map(|s| s.to_string()),
            })
        })
        .collect()
}

/// One response per line.
pub fn load_lines(path: &Path) -> Result<Vec<String>, ResponderError> {
    Ok(data_lines(&read(path)?).map(|(_, l)| l.trim().to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Retrieved {
    pub index: usize,
    pub similarity: f64,
    pub response: String,
}

/// TF-IDF settings for retrieval indices. Every term is kept so that small
/// or single-entry indices still have a vocabulary.
pub fn retrieval_tfidf_config() -> TfidfConfig {
    TfidfConfig { max_df: 1.0, ..TfidfConfig::default() }
}

/// Index of the most similar training vector (earliest wins ties) and its
/// cosine similarity; `None` for a query with no known terms.
pub fn nearest_tfidf(model: &TfidfModel, tokens: &[String]) -> Option<(usize, f64)> {
    let q = model.vectorize(tokens);
    if q.is_zero() {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (v, _)) in model.training_vectors.iter().enumerate() {
        let sim = v.cosine(&q).unwrap_or(0.0);
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((i, sim));
        }
    }
    best
}

fn fit_prompts<'a>(
    prompts: impl Iterator<Item = &'a str>,
    annotator: &dyn Annotator,
) -> Result<TfidfModel, ResponderError> {
    let corpus: Vec<LabeledExample> =
        prompts.enumerate().map(|(i, p)| LabeledExample::new(&i.to_string(), p, annotator)).collect();
    Ok(TfidfModel::fit(&corpus, retrieval_tfidf_config())?)
}

/// Nearest-prompt responder over one category of handcrafted entries.
pub struct HandcraftedResponder {
    pub category: Category,
    pub entries: Vec<HandcraftedEntry>,
    pub model: TfidfModel,
    pub threshold: f64,
}

impl HandcraftedResponder {
    pub fn new(
        category: Category,
        entries: &[HandcraftedEntry],
        annotator: &dyn Annotator,
        threshold: f64,
    ) -> Result<Self, ResponderError> {
        let entries: Vec<HandcraftedEntry> = entries.iter().filter(|e| e.category == category).cloned().collect();
        if entries.is_empty() {
            return Err(ResponderError::EmptyCorpus(format!("{category} handcrafted list")));
        }
        let model = fit_prompts(entries.iter().map(|e| e.prompt.as_str()), annotator)?;
        Ok(Self { category, entries, model, threshold })
    }

    pub fn answer(&self, tokens: &[String]) -> Option<Retrieved> {
        answer_handcrafted(&self.entries, tokens, &self.model, self.threshold)
    }
}

/// Response of the prompt nearest to `tokens`, when its similarity reaches
/// `threshold`. `model` must be fitted on the prompts of `entries`, in order.
pub fn answer_handcrafted(
    entries: &[HandcraftedEntry],
    tokens: &[String],
    model: &TfidfModel,
    threshold: f64,
) -> Option<Retrieved> {
    let (index, similarity) = nearest_tfidf(model, tokens)?;
    (similarity >= threshold).then(|| Retrieved { index, similarity, response: entries[index].response.clone() })
}

/// Nearest stored question responder for news questions.
pub struct QaResponder {
    pub pairs: Vec<QaPair>,
    pub model: TfidfModel,
    pub threshold: f64,
}

impl QaResponder {
    pub fn new(pairs: Vec<QaPair>, annotator: &dyn Annotator, threshold: f64) -> Result<Self, ResponderError> {
        if pairs.is_empty() {
            return Err(ResponderError::EmptyCorpus("question-answer list".into()));
        }
        let model = fit_prompts(pairs.iter().map(|p| p.question.as_str()), annotator)?;
        Ok(Self { pairs, model, threshold })
    }

    pub fn answer(&self, tokens: &[String]) -> Option<Retrieved> {
        match_question(&self.pairs, tokens, &self.model, self.threshold)
    }
}

pub fn match_question(pairs: &[QaPair], tokens: &[String], model: &TfidfModel, threshold: f64) -> Option<Retrieved> {
    let (index, similarity) = nearest_tfidf(model, tokens)?;
    (similarity >= threshold).then(|| Retrieved { index, similarity, response: pairs[index].answer.clone() })
}
