use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lexicon::{CasingLexicon, ClosedClassLexicon};
use super::tokenize::is_punctuation;

/// Reduced part-of-speech tagset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "NNP")]
    Nnp,
    #[serde(rename = "NN")]
    Nn,
    #[serde(rename = "VB")]
    Vb,
    #[serde(rename = "JJ")]
    Jj,
    #[serde(rename = "PRP")]
    Prp,
    #[serde(rename = "DT")]
    Dt,
    #[serde(rename = "IN")]
    In,
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "PUNCT")]
    Punct,
    #[serde(rename = "OTHER")]
    Other,
}

impl Tag {
    pub const ALL: [Tag; 10] =
        [Tag::Nnp, Tag::Nn, Tag::Vb, Tag::Jj, Tag::Prp, Tag::Dt, Tag::In, Tag::Cd, Tag::Punct, Tag::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Nnp => "NNP",
            Tag::Nn => "NN",
            Tag::Vb => "VB",
            Tag::Jj => "JJ",
            Tag::Prp => "PRP",
            Tag::Dt => "DT",
            Tag::In => "IN",
            Tag::Cd => "CD",
            Tag::Punct => "PUNCT",
            Tag::Other => "OTHER",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tag::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| format!("unknown tag {s:?}"))
    }
}

const VERB_SUFFIXES: &[&str] = &["ing", "ed", "ize", "ise"];
const ADJ_SUFFIXES: &[&str] = &["ous", "ful", "able", "ible", "ive", "less", "ic", "ish", "al"];
const ADV_SUFFIXES: &[&str] = &["ly"];

/// Rule cascade: proper-noun lexicon entries, closed classes, surface
/// shape (punctuation, numbers), suffixes, then `NN`.
pub fn pos_tag(tokens: &[String], casing: &CasingLexicon, closed: &ClosedClassLexicon) -> Vec<Tag> {
    let segments = casing.segment(tokens);
    tokens
        .iter()
        .zip(segments)
        .map(|(token, seg)| {
            if seg.is_some_and(|(entry, _)| entry.proper) {
                return Tag::Nnp;
            }
            if let Some(tag) = closed.get(token) {
                return tag;
            }
            if is_punctuation(token) {
                return Tag::Punct;
            }
            if token.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
                return Tag::Cd;
            }
            suffix_tag(&token.to_lowercase())
        })
        .collect()
}

fn suffix_tag(word: &str) -> Tag {
    let long_enough = |suffix: &str| word.len() > suffix.len() + 2 && word.ends_with(suffix);
    if VERB_SUFFIXES.iter().any(|s| long_enough(s)) {
        Tag::Vb
    } else if ADV_SUFFIXES.iter().any(|s| long_enough(s)) {
        Tag::Other
    } else if ADJ_SUFFIXES.iter().any(|s| long_enough(s)) {
        Tag::Jj
    } else {
        Tag::Nn
    }
}
