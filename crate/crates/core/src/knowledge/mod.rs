//! Local knowledge indices: entity concepts with popularity, fuzzy alias
//! lookup onto canonical labels, and per-topic facts.
//!
//! All indices are built once from tab-separated fixture files and are
//! immutable afterwards. Blank lines and lines starting with `#` are skipped
//! by every loader.

mod concepts;
mod facts;
mod labels;
mod levenshtein;

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub use concepts::{ConceptEntry, ConceptIndex};
pub use facts::{FactRecord, FactStore};
pub use labels::{fuzzy_label_lookup, LabelEntry, LabelIndex, LabelMatch, DEFAULT_MAX_LABEL_DISTANCE};
pub use levenshtein::{levenshtein, levenshtein_within};

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("{}:{line}: {reason}", path.display())]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptScore {
    pub concept: String,
    pub popularity: u64,
}

/// An entity recognized in an utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub surface: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_id: Option<String>,
    #[serde(default)]
    pub concepts: Vec<ConceptScore>,
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, KnowledgeError> {
    std::fs::read_to_string(path).map_err(|source| KnowledgeError::Io { path: path.to_path_buf(), source })
}
