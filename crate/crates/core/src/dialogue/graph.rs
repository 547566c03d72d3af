//! Dialogue-graph documents: parsing, structural validation and lint.
//!
//! A document describes one topic:
//!
//! ```yaml
//! topic: movies
//! keywords: [movie, movies, film]
//! concepts: [film]
//! initial: greet
//! states:
//!   - id: greet
//!     action: respond movies_greet
//!     transitions:
//!       - "yes -> ask"
//!       - "default -> bye"
//!   - id: ask
//!     action: respond movies_ask
//!   - id: bye
//!     action: respond movies_bye
//! switch_intents:
//!   - "stop -> bye"
//! intent_examples:
//!   stop: [stop talking, let's end this]
//! templates:
//!   movies_greet: [[Sure!, Great!], Do you like movies?]
//! ```
//!
//! Actions: `respond <template>`, `remember <scope> <key> <expr>`,
//! `fetch_facts <expr> [<topic>]`, `noop`. Expressions: `$entity`,
//! `$focus`, `$text`, or a literal (optionally double-quoted).
//!
//! Guards: `intent(<id>)`, `entity_concept(<concept>)`, `keyword(<phrase>)`,
//! `context_has(<key>)`, `yes`, `no`, `default`. Transitions are tried in
//! declared order; `default`, when present, must be last.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::Scope;
use crate::nlg::{NlgError, OrderedPairs, SegmentDoc, TemplateSet};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{file}: {message}")]
    Parse { file: String, line: Option<usize>, message: String },
    #[error("{file}: state {state}: unknown target {target:?}")]
    UnknownTarget { file: String, state: String, target: String },
    #[error("{file}: duplicate state id {state:?}")]
    DuplicateState { file: String, state: String },
    #[error("{file}: initial state {state:?} is not defined")]
    MissingInitial { file: String, state: String },
    #[error("{file}: state {state}: default transition must be last and unique")]
    DefaultNotLast { file: String, state: String },
    #[error("{file}: state {state}: {message}")]
    BadState { file: String, state: String, message: String },
    #[error("{file}: switch intent {intent:?}: unknown target {target:?}")]
    UnknownSwitchTarget { file: String, intent: String, target: String },
    #[error("{file}: {source}")]
    Template {
        file: String,
        #[source]
        source: NlgError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueExpr {
    Entity,
    Focus,
    Text,
    Literal(String),
}

impl ValueExpr {
    fn parse(s: &str) -> Self {
        match s {
            "$entity" => ValueExpr::Entity,
            "$focus" => ValueExpr::Focus,
            "$text" => ValueExpr::Text,
            other => ValueExpr::Literal(other.trim_matches('"').to_string()),
        }
    }
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Entity => f.write_str("$entity"),
            ValueExpr::Focus => f.write_str("$focus"),
            ValueExpr::Text => f.write_str("$text"),
            ValueExpr::Literal(s) => write!(f, "\"{s}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Respond { template: String },
    Remember { scope: Scope, key: String, value: ValueExpr },
    FetchFacts { entity: ValueExpr, topic: Option<String> },
    Noop,
}

impl Action {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let (verb, rest) = text.split_once(char::is_whitespace).map_or((text, ""), |(v, r)| (v, r.trim()));
        match verb {
            "respond" if !rest.is_empty() && !rest.contains(char::is_whitespace) => {
                Ok(Action::Respond { template: rest.to_string() })
            }
            "remember" => {
                let mut parts = rest.splitn(3, char::is_whitespace);
                let (Some(scope), Some(key), Some(value)) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(format!("expected `remember <scope> <key> <expr>`, got {text:?}"));
                };
                Ok(Action::Remember {
                    scope: scope.parse()?,
                    key: key.to_string(),
                    value: ValueExpr::parse(value.trim()),
                })
            }
            "fetch_facts" => {
                let mut parts = rest.split_whitespace();
                let entity = parts.next().ok_or("fetch_facts needs an entity expression")?;
                let topic = parts.next().map(str::to_string);
                if parts.next().is_some() {
                    return Err(format!("too many arguments in {text:?}"));
                }
                Ok(Action::FetchFacts { entity: ValueExpr::parse(entity), topic })
            }
            "noop" if rest.is_empty() => Ok(Action::Noop),
            _ => Err(format!("unknown action {text:?}")),
        }
    }

    pub fn is_respond(&self) -> bool {
        matches!(self, Action::Respond { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Respond { template } => write!(f, "respond {template}"),
            Action::Remember { scope, key, value } => {
                let scope = match scope {
                    Scope::Turn => "turn",
                    Scope::Session => "session",
                    Scope::LongTerm => "long_term",
                };
                write!(f, "remember {scope} {key} {value}")
            }
            Action::FetchFacts { entity, topic: Some(t) } => write!(f, "fetch_facts {entity} {t}"),
            Action::FetchFacts { entity, topic: None } => write!(f, "fetch_facts {entity}"),
            Action::Noop => f.write_str("noop"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guard {
    Intent(String),
    EntityConcept(String),
    Keyword(String),
    ContextHas(String),
    Yes,
    No,
    Default,
}

impl Guard {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        match text {
            "yes" => return Ok(Guard::Yes),
            "no" => return Ok(Guard::No),
            "default" => return Ok(Guard::Default),
            _ => {}
        }
        let (name, arg) = text
            .strip_suffix(')')
            .and_then(|t| t.split_once('('))
            .map(|(n, a)| (n.trim(), a.trim()))
            .filter(|(_, a)| !a.is_empty())
            .ok_or_else(|| format!("malformed guard {text:?}"))?;
        match name {
            "intent" => Ok(Guard::Intent(arg.to_string())),
            "entity_concept" => Ok(Guard::EntityConcept(arg.to_string())),
            "keyword" => Ok(Guard::Keyword(arg.to_lowercase())),
            "context_has" => Ok(Guard::ContextHas(arg.to_string())),
            _ => Err(format!("unknown guard {name:?}")),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Intent(i) => write!(f, "intent({i})"),
            Guard::EntityConcept(c) => write!(f, "entity_concept({c})"),
            Guard::Keyword(k) => write!(f, "keyword({k})"),
            Guard::ContextHas(k) => write!(f, "context_has({k})"),
            Guard::Yes => f.write_str("yes"),
            Guard::No => f.write_str("no"),
            Guard::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub guard: Guard,
    pub target: String,
}

fn parse_arrow(text: &str) -> Result<(&str, &str), String> {
    text.split_once("->")
        .map(|(l, r)| (l.trim(), r.trim()))
        .filter(|(l, r)| !l.is_empty() && !r.is_empty())
        .ok_or_else(|| format!("expected `<lhs> -> <target>`, got {text:?}"))
}

impl Transition {
    pub fn parse(text: &str) -> Result<Self, String> {
        let (guard, target) = parse_arrow(text)?;
        Ok(Self { guard: Guard::parse(guard)?, target: target.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub action: Action,
    pub transitions: Vec<Transition>,
}

impl State {
    pub fn is_terminal(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DialogueGraph {
    pub topic: String,
    pub keywords: Vec<String>,
    pub concepts: BTreeSet<String>,
    pub initial: String,
    pub states: BTreeMap<String, State>,
    /// State ids in document order.
    pub state_order: Vec<String>,
    /// Intent id to target state, in document order.
    pub switch_intents: Vec<(String, String)>,
    pub intent_examples: BTreeMap<String, Vec<String>>,
    pub templates: TemplateSet,
    pub source: Option<PathBuf>,
}

impl DialogueGraph {
    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.get(id)
    }

    pub fn switch_target(&self, intent: &str) -> Option<&str> {
        self.switch_intents.iter().find(|(i, _)| i == intent).map(|(_, t)| t.as_str())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Parse {
            file: file.clone(),
            line: None,
            message: e.to_string(),
        })?;
        let mut g = Self::parse(&text, &file)?;
        g.source = Some(path.to_path_buf());
        Ok(g)
    }

    pub fn parse(text: &str, file: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument = serde_yaml::from_str(text).map_err(|e| GraphError::Parse {
            file: file.to_string(),
            line: e.location().map(|l| l.line()),
            message: e.to_string(),
        })?;
        doc.build(file)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    topic: String,
    #[serde(default)]
    keywords: Vec<String>,
    #[serde(default)]
    concepts: Vec<String>,
    initial: String,
    states: Vec<StateDocument>,
    #[serde(default)]
    switch_intents: Vec<String>,
    #[serde(default)]
    intent_examples: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    templates: OrderedPairs<Vec<SegmentDoc>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDocument {
    id: String,
    action: String,
    #[serde(default)]
    transitions: Vec<String>,
}

impl GraphDocument {
    fn build(self, file: &str) -> Result<DialogueGraph, GraphError> {
        let f = || file.to_string();
        if self.topic.trim().is_empty() {
            return Err(GraphError::Parse { file: f(), line: None, message: "topic must not be empty".into() });
        }
        let mut states = BTreeMap::new();
        let mut state_order = Vec::new();
        for sd in self.states {
            let bad = |message: String| GraphError::BadState { file: f(), state: sd.id.clone(), message };
            let action = Action::parse(&sd.action).map_err(bad)?;
            let transitions =
                sd.transitions.iter().map(|t| Transition::parse(t)).collect::<Result<Vec<_>, _>>().map_err(bad)?;
            let defaults = transitions.iter().filter(|t| t.guard == Guard::Default).count();
            if defaults > 1 || (defaults == 1 && transitions.last().is_some_and(|t| t.guard != Guard::Default)) {
                return Err(GraphError::DefaultNotLast { file: f(), state: sd.id });
            }
            if states.contains_key(&sd.id) {
                return Err(GraphError::DuplicateState { file: f(), state: sd.id });
            }
            state_order.push(sd.id.clone());
            states.insert(sd.id.clone(), State { id: sd.id, action, transitions });
        }
        if !states.contains_key(&self.initial) {
            return Err(GraphError::MissingInitial { file: f(), state: self.initial });
        }
        for id in &state_order {
            for t in &states[id].transitions {
                if !states.contains_key(&t.target) {
                    return Err(GraphError::UnknownTarget { file: f(), state: id.clone(), target: t.target.clone() });
                }
            }
        }
        let mut switch_intents = Vec::new();
        for s in &self.switch_intents {
            let (intent, target) =
                parse_arrow(s).map_err(|message| GraphError::Parse { file: f(), line: None, message })?;
            if !states.contains_key(target) {
                return Err(GraphError::UnknownSwitchTarget {
                    file: f(),
                    intent: intent.into(),
                    target: target.into(),
                });
            }
            switch_intents.push((intent.to_string(), target.to_string()));
        }
        let templates =
            TemplateSet::from_pairs(self.templates.0).map_err(|source| GraphError::Template { file: f(), source })?;
        Ok(DialogueGraph {
            topic: self.topic.trim().to_string(),
            keywords: self.keywords,
            concepts: self.concepts.into_iter().collect(),
            initial: self.initial,
            states,
            state_order,
            switch_intents,
            intent_examples: self.intent_examples,
            templates,
            source: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Unreachable,
    DeadEnd,
    UnknownTemplate,
    IntentWithoutExamples,
    UnresolvedPlaceholder,
    Parse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub topic: String,
    pub state: Option<String>,
    pub kind: FindingKind,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.state {
            Some(s) => write!(f, "{}/{}: {}", self.topic, s, self.message),
            None => write!(f, "{}: {}", self.topic, self.message),
        }
    }
}

/// Elementary intents answered by the built-in yes/no recognizer.
pub const ELEMENTARY_INTENTS: [&str; 2] = ["yes", "no"];

/// Structural problems a loaded graph can still have. `shared` holds
/// templates defined outside the graph document.
pub fn lint_graph(graph: &DialogueGraph, shared: &TemplateSet) -> Vec<Finding> {
    let mut findings = Vec::new();
    let finding = |state: Option<&str>, kind, message: String| Finding {
        topic: graph.topic.clone(),
        state: state.map(str::to_string),
        kind,
        message,
    };

    let mut reachable = BTreeSet::new();
    let mut queue = VecDeque::from([graph.initial.as_str()]);
    for (_, target) in &graph.switch_intents {
        queue.push_back(target);
    }
    while let Some(id) = queue.pop_front() {
        if !reachable.insert(id) {
            continue;
        }
        if let Some(s) = graph.states.get(id) {
            queue.extend(s.transitions.iter().map(|t| t.target.as_str()));
        }
    }

    for id in &graph.state_order {
        let state = &graph.states[id];
        if !reachable.contains(id.as_str()) {
            findings.push(finding(Some(id), FindingKind::Unreachable, "unreachable from the initial state".into()));
        }
        if state.is_terminal() && !state.action.is_respond() {
            findings.push(finding(
                Some(id),
                FindingKind::DeadEnd,
                format!("no outgoing transition after non-terminal action `{}`", state.action),
            ));
        }
        if let Action::Respond { template } = &state.action {
            if graph.templates.get(template).or_else(|| shared.get(template)).is_none() {
                findings.push(finding(
                    Some(id),
                    FindingKind::UnknownTemplate,
                    format!("template {template:?} is not defined"),
                ));
            }
        }
        for t in &state.transitions {
            if let Guard::Intent(intent) = &t.guard {
                if !graph.intent_examples.contains_key(intent) && !ELEMENTARY_INTENTS.contains(&intent.as_str()) {
                    findings.push(finding(
                        Some(id),
                        FindingKind::IntentWithoutExamples,
                        format!("intent {intent:?} has no examples"),
                    ));
                }
            }
        }
    }
    for (intent, _) in &graph.switch_intents {
        if !graph.intent_examples.contains_key(intent) {
            findings.push(finding(
                None,
                FindingKind::IntentWithoutExamples,
                format!("switch intent {intent:?} has no examples"),
            ));
        }
    }
    findings
}
