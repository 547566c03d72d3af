use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{lowercase_all, Annotations, PhraseMatcher};
use crate::context::Context;
use crate::intent::{Classification, IntentClassifier};
use crate::knowledge::EntityRecord;

/// Classifier label prefix for structured topics, e.g. `structured_topic/movies`.
pub const STRUCTURED_PREFIX: &str = "structured_topic/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    StructuredTopic,
    Chitchat,
    QuestionAnswering,
    PersonalInfo,
    Opinion,
    RepeatRequest,
    RefuseProfanity,
}

impl Module {
    pub fn as_str(self) -> &'static str {
        match self {
            Module::StructuredTopic => "structured_topic",
            Module::Chitchat => "chitchat",
            Module::QuestionAnswering => "question_answering",
            Module::PersonalInfo => "personal_info",
            Module::Opinion => "opinion",
            Module::RepeatRequest => "repeat_request",
            Module::RefuseProfanity => "refuse_profanity",
        }
    }

    /// Module named by a classifier label, with the topic for structured labels.
    pub fn from_label(label: &str) -> Option<(Module, Option<&str>)> {
        if let Some(topic) = label.strip_prefix(STRUCTURED_PREFIX) {
            return (!topic.is_empty()).then_some((Module::StructuredTopic, Some(topic)));
        }
        let m = match label {
            "chitchat" => Module::Chitchat,
            "question_answering" => Module::QuestionAnswering,
            "personal_info" => Module::PersonalInfo,
            "opinion" => Module::Opinion,
            _ => return None,
        };
        Some((m, None))
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    TopicRequest,
    OngoingDialogue,
    AsrConfidence,
    Profanity,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub module: Module,
    /// The gate that made the decision.
    pub decided_by: Gate,
    pub topic: Option<String>,
    /// One line per gate consulted, `<gate>: <outcome>`.
    pub trace: Vec<String>,
    /// Top-level classifier output, when the classifier gate was reached.
    pub intent: Option<Classification>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicRequest {
    None,
    Topic(String),
    Ambiguous(Vec<String>),
}

pub const DEFAULT_TRIGGERS: &[&str] = &[
    "let's talk about",
    "let's chat about",
    "let us talk about",
    "talk about",
    "chat about",
    "tell me about",
    "switch to",
    "i want to talk about",
    "can we talk about",
];

/// Topics with dialogue graphs, and the concepts each one accepts.
#[derive(Debug, Clone, Default)]
pub struct TopicCatalog {
    pub topics: BTreeMap<String, Vec<String>>,
}

impl TopicCatalog {
    pub fn insert(&mut self, topic: &str, concepts: impl IntoIterator<Item = String>) {
        self.topics.entry(topic.to_string()).or_default().extend(concepts);
    }

    pub fn contains(&self, topic: &str) -> bool {
        self.topics.contains_key(topic)
    }
}

#[derive(Debug, Clone)]
pub struct RouterConfig {
    pub classifier_floor: f64,
    triggers: PhraseMatcher<()>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self::new(0.5, DEFAULT_TRIGGERS.iter().copied())
    }
}

impl RouterConfig {
    pub fn new<'a>(classifier_floor: f64, triggers: impl IntoIterator<Item = &'a str>) -> Self {
        let mut m = PhraseMatcher::default();
        for t in triggers {
            m.insert(&t.to_lowercase(), ());
        }
        Self { classifier_floor, triggers: m }
    }
}

/// An explicit request to switch topic: a trigger phrase followed by keywords
/// of exactly one known topic. Keywords before the trigger do not count.
pub fn detect_topic_request(ann: &Annotations, config: &RouterConfig, catalog: &TopicCatalog) -> TopicRequest {
    let lower = lowercase_all(&ann.tokens);
    let Some(&(_, end, _)) = config.triggers.find_all(&lower).first() else {
        return TopicRequest::None;
    };
    let tail = &lower[end..];
    let mut topics: Vec<String> = Vec::new();
    for hit in &ann.topic_keywords {
        if !catalog.contains(&hit.topic) || topics.contains(&hit.topic) {
            continue;
        }
        let words: Vec<&str> = hit.keyword.split_whitespace().collect();
        if tail.windows(words.len().max(1)).any(|w| w.iter().zip(&words).all(|(a, b)| a == b)) {
            topics.push(hit.topic.clone());
        }
    }
    match topics.len() {
        0 => TopicRequest::None,
        1 => TopicRequest::Topic(topics.remove(0)),
        _ => {
            topics.sort();
            TopicRequest::Ambiguous(topics)
        }
    }
}

/// Topic whose accepted concepts have the highest summed popularity over
/// the mentioned entities; ties go to the smaller topic id.
pub fn select_topic_by_entity<'a>(
    entities: impl IntoIterator<Item = &'a EntityRecord>,
    catalog: &TopicCatalog,
) -> Option<String> {
    let entities: Vec<&EntityRecord> = entities.into_iter().collect();
    let mut best: Option<(u64, &str)> = None;
    for (topic, concepts) in &catalog.topics {
        let score: u64 = entities
            .iter()
            .flat_map(|e| &e.concepts)
            .filter(|c| concepts.contains(&c.concept))
            .map(|c| c.popularity)
            .sum();
        if score > 0 && best.is_none_or(|(b, _)| score > b) {
            best = Some((score, topic));
        }
    }
    best.map(|(_, t)| t.to_string())
}

/// Chooses the module for a turn. Gates run in a fixed order: explicit topic
/// request, ongoing dialogue, recognition confidence, profanity, classifier.
pub fn route_turn(
    ctx: &Context,
    ann: &Annotations,
    classifier: &dyn IntentClassifier,
    config: &RouterConfig,
    catalog: &TopicCatalog,
) -> RoutingDecision {
    let mut trace = Vec::new();
    let decide = |gate, module, topic: Option<String>, trace| RoutingDecision {
        module,
        decided_by: gate,
        topic,
        trace,
        intent: None,
    };

    match detect_topic_request(ann, config, catalog) {
        TopicRequest::Topic(t) => {
            trace.push(format!("topic_request: {t}"));
            return decide(Gate::TopicRequest, Module::StructuredTopic, Some(t), trace);
        }
        TopicRequest::Ambiguous(ts) => trace.push(format!("topic_request: ambiguous ({})", ts.join(", "))),
        TopicRequest::None => trace.push("topic_request: none".into()),
    }

    match ctx.cursor().filter(|c| catalog.contains(&c.topic)) {
        Some(c) => {
            trace.push(format!("ongoing_dialogue: {} at {}", c.topic, c.state));
            return decide(Gate::OngoingDialogue, Module::StructuredTopic, Some(c.topic.clone()), trace);
        }
        None => trace.push("ongoing_dialogue: none".into()),
    }

    if !ann.confident {
        trace.push(format!("asr_confidence: low ({:.2})", ann.mean_confidence));
        return decide(Gate::AsrConfidence, Module::RepeatRequest, None, trace);
    }
    trace.push(format!("asr_confidence: ok ({:.2})", ann.mean_confidence));

    if ann.profane {
        trace.push(format!("profanity: {}", ann.profanity_matches.join(", ")));
        return decide(Gate::Profanity, Module::RefuseProfanity, None, trace);
    }
    trace.push("profanity: clean".into());

    let c = classifier.classify(&ann.tokens, &ann.pos_tags);
    let mut decision = if c.score < config.classifier_floor {
        trace.push(format!("classifier: {} ({:.3}) below floor {:.2}", c.label, c.score, config.classifier_floor));
        decide(Gate::Classifier, Module::Chitchat, None, trace)
    } else {
        classifier_decision(&c, ann, catalog, trace)
    };
    decision.intent = Some(c);
    decision
}

fn classifier_decision(
    c: &Classification,
    ann: &Annotations,
    catalog: &TopicCatalog,
    mut trace: Vec<String>,
) -> RoutingDecision {
    let decide = |module, topic: Option<String>, trace| RoutingDecision {
        module,
        decided_by: Gate::Classifier,
        topic,
        trace,
        intent: None,
    };
    match Module::from_label(&c.label) {
        Some((Module::StructuredTopic, Some(topic))) => {
            let by_entity = select_topic_by_entity(ann.entities.iter().map(|m| &m.entity), catalog);
            let chosen = by_entity.clone().or_else(|| catalog.contains(topic).then(|| topic.to_string()));
            match chosen {
                Some(t) => {
                    let note = if by_entity.as_deref().is_some_and(|b| b != topic) { " (entity)" } else { "" };
                    trace.push(format!("classifier: {} ({:.3}) -> {t}{note}", c.label, c.score));
                    decide(Module::StructuredTopic, Some(t), trace)
                }
                None => {
                    trace.push(format!("classifier: {} ({:.3}) unknown topic", c.label, c.score));
                    decide(Module::Chitchat, None, trace)
                }
            }
        }
        Some((m, _)) => {
            trace.push(format!("classifier: {} ({:.3})", c.label, c.score));
            decide(m, None, trace)
        }
        None => {
            trace.push(format!("classifier: {} ({:.3}) unknown label", c.label, c.score));
            decide(Module::Chitchat, None, trace)
        }
    }
}
