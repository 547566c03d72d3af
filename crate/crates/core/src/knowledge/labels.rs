use std::path::Path;

use super::levenshtein::{levenshtein, levenshtein_within};
use super::{data_lines, read_file, KnowledgeError};

pub const DEFAULT_MAX_LABEL_DISTANCE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub alias: String,
    pub canonical_label: String,
    pub external_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatch {
    pub canonical_label: String,
    pub external_id: String,
    pub alias: String,
    pub distance: usize,
}

/// Alias table; aliases farther than [`DEFAULT_MAX_LABEL_DISTANCE`] edits
/// from their canonical label are dropped at ingestion.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    entries: Vec<LabelEntry>,
    // lowercase aliases, parallel to `entries`
    keys: Vec<String>,
    dropped: usize,
}

impl LabelIndex {
    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        Self::parse(&read_file(path)?, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, KnowledgeError> {
        let mut entries = Vec::new();
        for (line, raw) in data_lines(text) {
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(KnowledgeError::Malformed {
                    path: origin.to_path_buf(),
                    line,
                    reason: "expected alias<TAB>canonical label<TAB>external id".into(),
                });
            }
            entries.push(LabelEntry {
                alias: cols[0].to_string(),
                canonical_label: cols[1].to_string(),
                external_id: cols[2].to_string(),
            });
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_entries(entries: impl IntoIterator<Item = LabelEntry>) -> Self {
        let mut kept = Vec::new();
        let mut dropped = 0;
        for e in entries {
            if levenshtein(&e.alias.to_lowercase(), &e.canonical_label.to_lowercase()) > DEFAULT_MAX_LABEL_DISTANCE {
                dropped += 1;
            } else {
                kept.push(e);
            }
        }
        let keys = kept.iter().map(|e| e.alias.to_lowercase()).collect();
        Self { entries: kept, keys, dropped }
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    /// Rows removed by the distance filter during ingestion.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn lookup(&self, query: &str, max_distance: usize) -> Option<LabelMatch> {
        nearest(self.entries.iter().zip(self.keys.iter().map(String::as_str)), query, max_distance)
    }
}

/// Entry minimizing the edit distance between the lowercase query and the
/// lowercase alias. Ties go to the shorter alias, then the lexicographically
/// smaller one. Absent when the best distance exceeds `max_distance`.
pub fn fuzzy_label_lookup(entries: &[LabelEntry], query: &str, max_distance: usize) -> Option<LabelMatch> {
    let keys: Vec<String> = entries.iter().map(|e| e.alias.to_lowercase()).collect();
    nearest(entries.iter().zip(keys.iter().map(String::as_str)), query, max_distance)
}

fn nearest<'a>(
    candidates: impl Iterator<Item = (&'a LabelEntry, &'a str)>,
    query: &str,
    max_distance: usize,
) -> Option<LabelMatch> {
    let query = query.trim().to_lowercase();
    let mut best: Option<(usize, &LabelEntry, &str)> = None;
    for (entry, key) in candidates {
        let bound = best.map_or(max_distance, |(d, _, _)| d);
        let Some(d) = levenshtein_within(&query, key, bound) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bd, _, bkey)) => (d, key.chars().count(), key) < (bd, bkey.chars().count(), bkey),
        };
        if better {
            best = Some((d, entry, key));
        }
    }
    best.map(|(distance, e, _)| LabelMatch {
        canonical_label: e.canonical_label.clone(),
        external_id: e.external_id.clone(),
        alias: e.alias.clone(),
        distance,
    })
}
