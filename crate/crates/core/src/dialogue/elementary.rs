//! Elementary yes/no recognition used by `yes`/`no` guards.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{lowercase_all, normalized_words, PhraseMatcher};
use crate::intent::{cosine, sentence_embedding, EmbeddingTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

const YES: &[&str] = &[
    "yes",
    "yeah",
    "yep",
    "yup",
    "sure",
    "ok",
    "okay",
    "of course",
    "absolutely",
    "definitely",
    "certainly",
    "i do",
    "i did",
    "why not",
    "sounds good",
    "go ahead",
    "please do",
    "right",
    "correct",
    "totally",
];

const NO: &[&str] = &[
    "no",
    "nope",
    "nah",
    "not really",
    "never",
    "i don't",
    "i do n't",
    "i didn't",
    "no thanks",
    "not at all",
    "i'd rather not",
    "not now",
    "negative",
];

type Prototypes = (Arc<EmbeddingTable>, Vec<(Vec<f64>, Answer)>);

/// Phrase lists first; the earliest match decides. Utterances with no
/// list phrase fall back to nearest-prototype embedding similarity.
pub struct YesNoClassifier {
    matcher: PhraseMatcher<Answer>,
    embeddings: Option<Prototypes>,
    pub threshold: f64,
}

impl Default for YesNoClassifier {
    fn default() -> Self {
        let mut matcher = PhraseMatcher::default();
        for p in YES {
            matcher.insert(p, Answer::Yes);
        }
        for p in NO {
            matcher.insert(p, Answer::No);
        }
        Self { matcher, embeddings: None, threshold: 0.75 }
    }
}

impl YesNoClassifier {
    pub fn with_embeddings(mut self, table: Arc<EmbeddingTable>) -> Self {
        let mut protos = Vec::new();
        for (phrases, answer) in [(YES, Answer::Yes), (NO, Answer::No)] {
            for p in phrases {
                let words: Vec<String> = p.split_whitespace().map(str::to_string).collect();
                let e = sentence_embedding(&table, &words);
                if !e.is_zero() {
                    protos.push((e.vector, answer));
                }
            }
        }
        self.embeddings = Some((table, protos));
        self
    }

    pub fn classify(&self, tokens: &[String]) -> Answer {
        let lower = lowercase_all(tokens);
        let mut i = 0;
        while i < lower.len() {
            if let Some((len, answer)) = self.matcher.longest_at(&lower, i) {
                // "no problem", "not bad" style idioms read as assent
                if *answer == Answer::No && lower.get(i + len).is_some_and(|w| w == "problem" || w == "bad") {
                    return Answer::Yes;
                }
                return *answer;
            }
            i += 1;
        }
        let Some((table, protos)) = &self.embeddings else {
            return Answer::Unknown;
        };
        let q = sentence_embedding(table, &normalized_words(tokens));
        if q.is_zero() {
            return Answer::Unknown;
        }
        let mut best = (f64::NEG_INFINITY, Answer::Unknown);
        for (v, a) in protos {
            let sim = cosine(v, &q.vector).unwrap_or(0.0);
            if sim > best.0 {
                best = (sim, *a);
            }
        }
        if best.0 >= self.threshold {
            best.1
        } else {
            Answer::Unknown
        }
    }
}
