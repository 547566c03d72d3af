//! Line-oriented lexicon files and the phrase matcher they share.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::pos::Tag;
use super::tokenize::tokenize;
use super::AnalysisError;

/// Whole-token phrase lookup over lowercased token sequences.
#[derive(Debug, Clone)]
pub struct PhraseMatcher<T> {
    by_first: HashMap<String, Vec<(Vec<String>, T)>>,
    max_len: usize,
}

impl<T> Default for PhraseMatcher<T> {
    fn default() -> Self {
        Self { by_first: HashMap::new(), max_len: 0 }
    }
}

impl<T> PhraseMatcher<T> {
    /// Empty phrases are ignored.
    pub fn insert(&mut self, phrase: &str, payload: T) {
        let words: Vec<String> = tokenize(phrase).iter().map(|w| w.to_lowercase()).collect();
        let Some(first) = words.first().cloned() else {
            return;
        };
        self.max_len = self.max_len.max(words.len());
        self.by_first.entry(first).or_default().push((words, payload));
    }

    pub fn is_empty(&self) -> bool {
        self.by_first.is_empty()
    }

    /// Every `(start, length, payload)` occurrence, including overlapping ones.
    pub fn find_all<'a>(&'a self, lower: &[String]) -> Vec<(usize, usize, &'a T)> {
        let mut hits = Vec::new();
        for start in 0..lower.len() {
            if let Some(cands) = self.by_first.get(&lower[start]) {
                for (words, payload) in cands {
                    if lower[start..].starts_with(words) {
                        hits.push((start, words.len(), payload));
                    }
                }
            }
        }
        hits
    }

    /// Longest phrase starting at `start`.
    pub fn longest_at<'a>(&'a self, lower: &[String], start: usize) -> Option<(usize, &'a T)> {
        self.by_first
            .get(lower.get(start)?)?
            .iter()
            .filter(|(words, _)| lower[start..].starts_with(words))
            .max_by_key(|(words, _)| words.len())
            .map(|(words, payload)| (words.len(), payload))
    }
}

pub fn lowercase_all(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasingEntry {
    pub canonical: Vec<String>,
    pub proper: bool,
}

/// `lowercase<TAB>canonical<TAB>is_proper`. Keys may span several words
/// (`star wars<TAB>Star Wars<TAB>1`).
#[derive(Debug, Clone, Default)]
pub struct CasingLexicon {
    matcher: PhraseMatcher<CasingEntry>,
}

impl CasingLexicon {
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = read(path)?;
        let mut lex = Self::default();
        for (line, raw) in data_lines(&text) {
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let bad =
                |reason: &str| AnalysisError::Lexicon { path: path.display().to_string(), line, reason: reason.into() };
            if cols.len() != 3 {
                return Err(bad("expected lowercase<TAB>canonical<TAB>is_proper"));
            }
            let proper = match cols[2] {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" => false,
                _ => return Err(bad("is_proper must be 1/0 or true/false")),
            };
            if tokenize(cols[0]).len() != tokenize(cols[1]).len() {
                return Err(bad("canonical form must have the same token count as the key"));
            }
            lex.insert(cols[0], cols[1], proper);
        }
        Ok(lex)
    }

    pub fn insert(&mut self, lowercase: &str, canonical: &str, proper: bool) {
        self.matcher.insert(lowercase, CasingEntry { canonical: tokenize(canonical), proper });
    }

    /// Greedy longest-match segmentation: for each token, the lexicon entry
    /// covering it and the offset inside that entry.
    pub fn segment<'a>(&'a self, tokens: &[String]) -> Vec<Option<(&'a CasingEntry, usize)>> {
        let lower = lowercase_all(tokens);
        let mut out = vec![None; tokens.len()];
        let mut i = 0;
        while i < lower.len() {
            match self.matcher.longest_at(&lower, i) {
                Some((len, entry)) => {
                    for k in 0..len {
                        out[i + k] = Some((entry, k));
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

/// `TAG<TAB>word` rows for closed word classes.
#[derive(Debug, Clone, Default)]
pub struct ClosedClassLexicon {
    words: HashMap<String, Tag>,
}

impl ClosedClassLexicon {
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = read(path)?;
        let mut lex = Self::default();
        for (line, raw) in data_lines(&text) {
            let (tag, word) = raw
                .split_once('\t')
                .and_then(|(t, w)| Some((t.trim().parse::<Tag>().ok()?, w.trim())))
                .filter(|(_, w)| !w.is_empty())
                .ok_or_else(|| AnalysisError::Lexicon {
                    path: path.display().to_string(),
                    line,
                    reason: "expected TAG<TAB>word with a known tag".into(),
                })?;
            lex.insert(word, tag);
        }
        Ok(lex)
    }

    pub fn insert(&mut self, word: &str, tag: Tag) {
        self.words.insert(word.to_lowercase(), tag);
    }

    pub fn get(&self, word: &str) -> Option<Tag> {
        self.words.get(&word.to_lowercase()).copied()
    }
}

/// Banned words and phrases, one per line.
#[derive(Debug, Clone, Default)]
pub struct Blacklist {
    matcher: PhraseMatcher<String>,
}

impl Blacklist {
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = read(path)?;
        Ok(Self::from_entries(data_lines(&text).map(|(_, l)| l.trim())))
    }

    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a str>) -> Self {
        let mut matcher = PhraseMatcher::default();
        for e in entries {
            matcher.insert(e, e.trim().to_lowercase());
        }
        Self { matcher }
    }

    pub(crate) fn matcher(&self) -> &PhraseMatcher<String> {
        &self.matcher
    }
}

/// `topic<TAB>phrase` rows.
#[derive(Debug, Clone, Default)]
pub struct KeywordLists {
    matcher: PhraseMatcher<(String, String)>,
    topics: BTreeSet<String>,
}

impl KeywordLists {
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = read(path)?;
        let mut lists = Self::default();
        for (line, raw) in data_lines(&text) {
            let (topic, phrase) = raw
                .split_once('\t')
                .map(|(t, p)| (t.trim(), p.trim()))
                .filter(|(t, p)| !t.is_empty() && !p.is_empty())
                .ok_or_else(|| AnalysisError::Lexicon {
                    path: path.display().to_string(),
                    line,
                    reason: "expected topic<TAB>phrase".into(),
                })?;
            lists.insert(topic, phrase);
        }
        Ok(lists)
    }

    pub fn insert(&mut self, topic: &str, phrase: &str) {
        self.topics.insert(topic.to_string());
        self.matcher.insert(phrase, (topic.to_string(), phrase.trim().to_lowercase()));
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(String::as_str)
    }

    pub(crate) fn matcher(&self) -> &PhraseMatcher<(String, String)> {
        &self.matcher
    }
}

fn read(path: &Path) -> Result<String, AnalysisError> {
    std::fs::read_to_string(path)
        .map_err(|e| AnalysisError::Io { path: path.display().to_string(), reason: e.to_string() })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    crate::knowledge::data_lines(text)
}
