//! Utterance analysis: tokens, case restoration, part-of-speech tags,
//! entity and focus extraction, topic keywords, ASR confidence and
//! profanity verdicts.

mod asr;
mod focus;
mod lexicon;
mod pos;
mod tokenize;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::knowledge::{ConceptIndex, EntityRecord, LabelIndex, DEFAULT_MAX_LABEL_DISTANCE};

pub use asr::{asr_gate, AsrGateConfig, AsrHypothesis, AsrToken, GateOutcome, MEAN_TOLERANCE};
pub use focus::{extract_focus, Span};
pub use lexicon::{
    lowercase_all, Blacklist, CasingEntry, CasingLexicon, ClosedClassLexicon, KeywordLists, PhraseMatcher,
};
pub use pos::{pos_tag, Tag};
pub use tokenize::{is_punctuation, normalized_words, tokenize};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("malformed ASR input: {0}")]
    MalformedHypothesis(String),
    #[error("{path}:{line}: {reason}")]
    Lexicon { path: String, line: usize, reason: String },
    #[error("reading {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Pluggable tokenizer, truecaser and tagger.
pub trait Annotator: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
    fn truecase(&self, tokens: &[String]) -> Vec<String>;
    fn pos_tag(&self, tokens: &[String]) -> Vec<Tag>;
}

/// The built-in lexicon-driven annotator.
#[derive(Debug, Clone, Default)]
pub struct RuleAnnotator {
    pub casing: CasingLexicon,
    pub closed: ClosedClassLexicon,
}

impl Annotator for RuleAnnotator {
    fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize(text)
    }

    fn truecase(&self, tokens: &[String]) -> Vec<String> {
        truecase(tokens, &self.casing)
    }

    fn pos_tag(&self, tokens: &[String]) -> Vec<Tag> {
        pos_tag(tokens, &self.casing, &self.closed)
    }
}

/// Replaces tokens by their canonical lexicon form; an unknown token that
/// starts a sentence gets its first letter capitalized.
pub fn truecase(tokens: &[String], lexicon: &CasingLexicon) -> Vec<String> {
    let segments = lexicon.segment(tokens);
    let mut sentence_start = true;
    tokens
        .iter()
        .zip(segments)
        .map(|(token, seg)| {
            let out = match seg {
                Some((entry, k)) => entry.canonical[k].clone(),
                None if sentence_start => capitalize(token),
                None => token.clone(),
            };
            sentence_start = matches!(token.as_str(), "." | "!" | "?");
            out
        })
        .collect()
}

fn capitalize(token: &str) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfanityVerdict {
    pub profane: bool,
    pub matches: Vec<String>,
}

/// Case-insensitive whole-token and contiguous-phrase matching.
pub fn profanity_scan(tokens: &[String], blacklist: &Blacklist) -> ProfanityVerdict {
    let lower = lowercase_all(tokens);
    let mut matches: Vec<String> = Vec::new();
    for (_, _, entry) in blacklist.matcher().find_all(&lower) {
        if !matches.contains(entry) {
            matches.push(entry.clone());
        }
    }
    ProfanityVerdict { profane: !matches.is_empty(), matches }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordHit {
    pub topic: String,
    pub keyword: String,
}

/// One record per `(topic, keyword)` found, in order of first appearance.
pub fn spot_keywords(tokens: &[String], lists: &KeywordLists) -> Vec<KeywordHit> {
    let lower = lowercase_all(tokens);
    let mut hits: Vec<KeywordHit> = Vec::new();
    for (_, _, (topic, keyword)) in lists.matcher().find_all(&lower) {
        let hit = KeywordHit { topic: topic.clone(), keyword: keyword.clone() };
        if !hits.contains(&hit) {
            hits.push(hit);
        }
    }
    hits
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    pub entity: EntityRecord,
}

impl EntityMention {
    pub fn span(&self) -> Span {
        Span { start: self.start, end: self.end }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    /// Text of the hypothesis the analysis ran on.
    pub text: String,
    pub tokens: Vec<String>,
    pub truecased: Vec<String>,
    pub pos_tags: Vec<Tag>,
    pub entities: Vec<EntityMention>,
    pub focus_phrases: Vec<String>,
    pub topic_keywords: Vec<KeywordHit>,
    pub profane: bool,
    pub profanity_matches: Vec<String>,
    pub confident: bool,
    pub chosen_hypothesis: u32,
    pub mean_confidence: f64,
}

impl Annotations {
    pub fn keyword_topics(&self) -> Vec<&str> {
        let mut topics: Vec<&str> = Vec::new();
        for hit in &self.topic_keywords {
            if !topics.contains(&hit.topic.as_str()) {
                topics.push(&hit.topic);
            }
        }
        topics
    }
}

/// The general analysis pipeline over shared, immutable lexicons.
pub struct Analyzer {
    pub annotator: Box<dyn Annotator>,
    pub blacklist: Blacklist,
    pub keywords: KeywordLists,
    pub asr: AsrGateConfig,
}

impl Analyzer {
    /// Runs on the best surviving hypothesis, or on the best overall one when
    /// none survives the gate (an ongoing dialogue may still use it).
    pub fn analyze(
        &self,
        hypotheses: &[AsrHypothesis],
        concepts: &ConceptIndex,
        labels: &LabelIndex,
    ) -> Result<Annotations, AnalysisError> {
        let gate = asr_gate(hypotheses, self.asr)?;
        let pool = if gate.confident { &gate.surviving[..] } else { hypotheses };
        let chosen = pool.iter().min_by_key(|h| h.rank).expect("gate rejects empty input");
        let text = chosen.text();
        let tokens = self.annotator.tokenize(&text);
        let truecased = self.annotator.truecase(&tokens);
        let pos_tags = self.annotator.pos_tag(&tokens);

        let nnp_focus = extract_focus(&truecased, &pos_tags, &[]);
        let entities = recognize_entities(&tokens, &truecased, &pos_tags, &nnp_focus, concepts, labels);
        let spans: Vec<Span> = entities.iter().map(EntityMention::span).collect();
        let focus_phrases = extract_focus(&truecased, &pos_tags, &spans);
        let profanity = profanity_scan(&tokens, &self.blacklist);
        let topic_keywords = spot_keywords(&tokens, &self.keywords);

        Ok(Annotations {
            text,
            tokens,
            truecased,
            pos_tags,
            entities,
            focus_phrases,
            topic_keywords,
            profane: profanity.profane,
            profanity_matches: profanity.matches,
            confident: gate.confident,
            chosen_hypothesis: chosen.rank,
            mean_confidence: chosen.mean_confidence().unwrap_or(0.0),
        })
    }
}

/// Concept-index hits by greedy longest span, then fuzzy label matches for
/// proper-noun runs the concept index missed.
pub fn recognize_entities(
    tokens: &[String],
    truecased: &[String],
    pos_tags: &[Tag],
    nnp_focus: &[String],
    concepts: &ConceptIndex,
    labels: &LabelIndex,
) -> Vec<EntityMention> {
    let lower = lowercase_all(tokens);
    let content =
        |i: usize| !is_punctuation(&tokens[i]) && !matches!(pos_tags[i], Tag::Dt | Tag::In | Tag::Prp | Tag::Punct);
    let mut mentions = Vec::new();
    let mut covered = vec![false; tokens.len()];
    let max_len = concepts.max_surface_words().max(1);
    let mut i = 0;
    while i < tokens.len() {
        let mut advanced = false;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            let span = i..i + len;
            if span.clone().any(|k| is_punctuation(&tokens[k])) || !span.clone().any(content) {
                continue;
            }
            let surface = lower[span.clone()].join(" ");
            let found = concepts.lookup(&surface);
            if found.is_empty() {
                continue;
            }
            let shown = truecased[span.clone()].join(" ");
            let (label, external_id) = match labels.lookup(&surface, DEFAULT_MAX_LABEL_DISTANCE) {
                Some(m) => (m.canonical_label, Some(m.external_id)),
                None => (shown.clone(), None),
            };
            mentions.push(EntityMention {
                start: i,
                end: i + len,
                entity: EntityRecord { surface: shown, label, external_id, concepts: found.to_vec() },
            });
            covered[span.clone()].iter_mut().for_each(|c| *c = true);
            i += len;
            advanced = true;
            break;
        }
        if !advanced {
            i += 1;
        }
    }

    let mut seen: HashSet<String> = mentions.iter().map(|m| m.entity.label.to_lowercase()).collect();
    for phrase in nnp_focus {
        let words: Vec<String> = tokenize(phrase);
        let Some(start) = find_span(truecased, &words) else { continue };
        let end = start + words.len();
        if covered[start..end].iter().any(|&c| c) {
            continue;
        }
        if let Some(m) = labels.lookup(phrase, DEFAULT_MAX_LABEL_DISTANCE) {
            if !seen.insert(m.canonical_label.to_lowercase()) {
                continue;
            }
            let found = concepts.lookup(&m.canonical_label).to_vec();
            mentions.push(EntityMention {
                start,
                end,
                entity: EntityRecord {
                    surface: phrase.clone(),
                    label: m.canonical_label,
                    external_id: Some(m.external_id),
                    concepts: found,
                },
            });
        }
    }
    mentions.sort_by_key(|m| m.start);
    mentions
}

fn find_span(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&s| haystack[s..s + needle.len()] == *needle)
}
