use serde::Serialize;

use super::elementary::{Answer, YesNoClassifier};
use super::graph::{DialogueGraph, Guard, State, ValueExpr, ELEMENTARY_INTENTS};
use crate::analysis::{lowercase_all, Annotations};
use crate::context::{Context, DialogueCursor, TopicMemory, Value};
use crate::intent::{Classification, IntentClassifier};

/// Longest chain of non-responding states executed within one turn.
pub const MAX_CHAIN: usize = 16;

pub const DEFAULT_INTENT_THRESHOLD: f64 = 0.75;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DialogueError {
    #[error("session cursor points at unknown state {state:?} of topic {topic:?}")]
    CorruptedCursor { topic: String, state: String },
    #[error("topic {topic}: more than {MAX_CHAIN} states chained in one turn ({path})")]
    Loop { topic: String, path: String },
    #[error("state {state}: {message}")]
    Action { state: String, message: String },
}

/// Performs state actions. The engine renders templates and queries
/// knowledge here; tests substitute a recorder.
pub trait ActionExecutor {
    fn execute(
        &mut self,
        graph: &DialogueGraph,
        state: &State,
        ctx: &mut Context,
        ann: &Annotations,
    ) -> Result<(), DialogueError>;
}

pub struct DialogueEnv<'a> {
    /// Classifier over the graph's own intent examples.
    pub intents: Option<&'a dyn IntentClassifier>,
    pub intent_threshold: f64,
    pub yes_no: &'a YesNoClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Entry {
    Entered,
    Switch(String),
    Guard(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub entry: Entry,
    /// States whose actions ran this turn, in order.
    pub visited: Vec<String>,
    /// The last visited state has no outgoing transitions; the cursor was cleared.
    pub ended: bool,
    pub intent: Option<Classification>,
}

impl StepOutcome {
    pub fn state(&self) -> &str {
        self.visited.last().map_or("", String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StepResult {
    Moved(StepOutcome),
    /// No guard of the current state matched; the cursor is unchanged.
    NoTransition {
        state: String,
        intent: Option<Classification>,
    },
}

struct Signals {
    intent: Option<Classification>,
    answer: Answer,
}

impl Signals {
    fn compute(ann: &Annotations, env: &DialogueEnv) -> Self {
        let intent =
            env.intents.map(|c| c.classify(&ann.tokens, &ann.pos_tags)).filter(|c| c.score >= env.intent_threshold);
        Self { intent, answer: env.yes_no.classify(&ann.tokens) }
    }
}

fn contains_phrase(lower: &[String], phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    !words.is_empty() && lower.windows(words.len()).any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
}

fn guard_holds(guard: &Guard, graph: &DialogueGraph, ctx: &Context, ann: &Annotations, sig: &Signals) -> bool {
    match guard {
        Guard::Default => true,
        Guard::Yes => sig.answer == Answer::Yes,
        Guard::No => sig.answer == Answer::No,
        Guard::Intent(id) => {
            if sig.intent.as_ref().is_some_and(|c| &c.label == id) {
                return true;
            }
            match id.as_str() {
                "yes" if !graph.intent_examples.contains_key(id) => sig.answer == Answer::Yes,
                "no" if !graph.intent_examples.contains_key(id) => sig.answer == Answer::No,
                _ => false,
            }
        }
        Guard::EntityConcept(c) => ann.entities.iter().any(|m| m.entity.concepts.iter().any(|s| &s.concept == c)),
        Guard::Keyword(k) => {
            ann.topic_keywords.iter().any(|h| h.keyword.eq_ignore_ascii_case(k))
                || contains_phrase(&lowercase_all(&ann.tokens), k)
        }
        Guard::ContextHas(key) => ctx.lookup(key).is_some(),
    }
}

fn first_match<'g>(
    state: &'g State,
    graph: &DialogueGraph,
    ctx: &Context,
    ann: &Annotations,
    sig: &Signals,
) -> Option<&'g super::graph::Transition> {
    state.transitions.iter().find(|t| guard_holds(&t.guard, graph, ctx, ann, sig))
}

/// Value of an action expression for the current turn. `$entity` falls back
/// to the last entity remembered for the topic.
pub fn evaluate(expr: &ValueExpr, ctx: &Context, ann: &Annotations, topic: &str) -> Option<Value> {
    match expr {
        ValueExpr::Entity => ann
            .entities
            .first()
            .map(|m| Value::Entity(m.entity.clone()))
            .or_else(|| ctx.topic_memory(topic)?.last_entity.clone().map(Value::Text)),
        ValueExpr::Focus => ann.focus_phrases.first().map(|f| Value::Text(f.clone())),
        ValueExpr::Text => Some(Value::Text(ann.text.clone())),
        ValueExpr::Literal(s) => Some(Value::Text(s.clone())),
    }
}

/// Advances `graph` by one user turn.
///
/// Outside the graph, the turn enters at the initial state. Inside it, a
/// detected switch intent jumps directly to its target; otherwise the
/// current state's guards are tried in declared order. Entered states run
/// their actions; states that do not respond continue through their own
/// guards in the same turn.
pub fn step_dialogue(
    graph: &DialogueGraph,
    ctx: &mut Context,
    ann: &Annotations,
    env: &DialogueEnv,
    exec: &mut dyn ActionExecutor,
) -> Result<StepResult, DialogueError> {
    let sig = Signals::compute(ann, env);
    let inside = ctx.cursor().filter(|c| c.topic == graph.topic).cloned();

    let (entry, target) = match inside {
        None => (Entry::Entered, graph.initial.clone()),
        Some(cursor) => {
            let Some(current) = graph.state(&cursor.state) else {
                return Err(DialogueError::CorruptedCursor { topic: cursor.topic, state: cursor.state });
            };
            let switch = sig
                .intent
                .as_ref()
                .filter(|c| !ELEMENTARY_INTENTS.contains(&c.label.as_str()))
                .and_then(|c| Some((c.label.clone(), graph.switch_target(&c.label)?)));
            if let Some((label, target)) = switch {
                (Entry::Switch(label), target.to_string())
            } else if let Some(t) = first_match(current, graph, ctx, ann, &sig) {
                (Entry::Guard(t.guard.to_string()), t.target.clone())
            } else {
                return Ok(StepResult::NoTransition { state: cursor.state, intent: sig.intent });
            }
        }
    };

    let mut visited = Vec::new();
    let mut id = target;
    let ended = loop {
        if visited.len() == MAX_CHAIN {
            return Err(DialogueError::Loop { topic: graph.topic.clone(), path: visited.join(" > ") });
        }
        let state = graph.state(&id).expect("targets are validated at load time");
        exec.execute(graph, state, ctx, ann)?;
        visited.push(id.clone());
        if state.is_terminal() {
            break true;
        }
        if state.action.is_respond() {
            break false;
        }
        match first_match(state, graph, ctx, ann, &sig) {
            Some(t) => id = t.target.clone(),
            None => break false,
        }
    };

    let last = visited.last().expect("at least one state ran").clone();
    ctx.set_cursor(if ended { None } else { Some(DialogueCursor { topic: graph.topic.clone(), state: last.clone() }) });
    let last_entity = ann
        .entities
        .first()
        .map(|m| m.entity.label.clone())
        .or_else(|| ctx.topic_memory(&graph.topic).and_then(|m| m.last_entity.clone()));
    ctx.set_topic_memory(&graph.topic, TopicMemory { last_state: last, last_entity });
    Ok(StepResult::Moved(StepOutcome { entry, visited, ended, intent: sig.intent }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::EntityMention;
    use crate::analysis::{tokenize, Tag};
    use crate::context::Scope;
    use crate::intent::Method;
    use crate::knowledge::{ConceptScore, EntityRecord};

    const GRAPH: &str = r#"
topic: movies
initial: greet
states:
  - id: greet
    action: respond greet
    transitions:
      - "yes -> ask_favorite"
      - "no -> bye"
  - id: ask_favorite
    action: respond ask_favorite
    transitions:
      - "entity_concept(film) -> store"
      - "default -> ask_favorite"
  - id: store
    action: remember session favorite_movie $entity
    transitions:
      - "context_has(favorite_movie) -> comment"
  - id: comment
    action: respond comment
    transitions:
      - "default -> bye"
  - id: joke
    action: respond joke
    transitions:
      - "default -> greet"
  - id: bye
    action: respond bye
switch_intents:
  - "tell_joke -> joke"
intent_examples:
  tell_joke: [tell me a joke]
templates:
  greet: [Do you like movies?]
  ask_favorite: [Which one?]
  comment: ["{favorite_movie} is great."]
  joke: [A joke.]
  bye: [Bye.]
"#;

    #[derive(Default)]
    struct Recorder(Vec<String>);

    impl ActionExecutor for Recorder {
        fn execute(
            &mut self,
            graph: &DialogueGraph,
            state: &State,
            ctx: &mut Context,
            ann: &Annotations,
        ) -> Result<(), DialogueError> {
            if let super::super::graph::Action::Remember { scope, key, value } = &state.action {
                if let Some(v) = evaluate(value, ctx, ann, &graph.topic) {
                    ctx.remember(*scope, key, v).unwrap();
                }
            }
            self.0.push(state.id.clone());
            Ok(())
        }
    }

    struct Fixed(Option<&'static str>);

    impl IntentClassifier for Fixed {
        fn method(&self) -> Method {
            Method::Embedding
        }
        fn classify(&self, _: &[String], _: &[Tag]) -> Classification {
            match self.0 {
                Some(l) => Classification { label: l.into(), score: 0.9 },
                None => Classification { label: "none".into(), score: 0.1 },
            }
        }
    }

    fn ann(text: &str) -> Annotations {
        let tokens = tokenize(text);
        Annotations {
            text: text.into(),
            truecased: tokens.clone(),
            pos_tags: vec![Tag::Nn; tokens.len()],
            tokens,
            entities: vec![],
            focus_phrases: vec![],
            topic_keywords: vec![],
            profane: false,
            profanity_matches: vec![],
            confident: true,
            chosen_hypothesis: 0,
            mean_confidence: 1.0,
        }
    }

    fn with_film(mut a: Annotations, label: &str) -> Annotations {
        a.entities.push(EntityMention {
            start: 0,
            end: 1,
            entity: EntityRecord {
                surface: label.to_lowercase(),
                label: label.into(),
                external_id: None,
                concepts: vec![ConceptScore { concept: "film".into(), popularity: 10 }],
            },
        });
        a
    }

    fn step(g: &DialogueGraph, ctx: &mut Context, a: &Annotations, intent: Option<&'static str>) -> StepResult {
        let yn = YesNoClassifier::default();
        let fixed = Fixed(intent);
        let env = DialogueEnv { intents: Some(&fixed), intent_threshold: DEFAULT_INTENT_THRESHOLD, yes_no: &yn };
        step_dialogue(g, ctx, a, &env, &mut Recorder::default()).unwrap()
    }

    fn moved(r: StepResult) -> StepOutcome {
        match r {
            StepResult::Moved(o) => o,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn walks_the_graph() {
        let g = DialogueGraph::parse(GRAPH, "t").unwrap();
        let mut ctx = Context::new("s");
        let o = moved(step(&g, &mut ctx, &ann("let's talk movies"), None));
        assert_eq!((o.entry.clone(), o.visited.clone()), (Entry::Entered, vec!["greet".to_string()]));
        let o = moved(step(&g, &mut ctx, &ann("yes"), None));
        assert_eq!(o.visited, vec!["ask_favorite"]);
        let o = moved(step(&g, &mut ctx, &with_film(ann("Inception"), "Inception"), None));
        assert_eq!(o.visited, vec!["store", "comment"]);
        assert_eq!(ctx.recall(Scope::Session, "favorite_movie").unwrap().render(), "Inception");
        assert_eq!(ctx.topic_memory("movies").unwrap().last_entity.as_deref(), Some("Inception"));
        let o = moved(step(&g, &mut ctx, &ann("ok"), None));
        assert!(o.ended);
        assert_eq!(ctx.cursor(), None);
    }

    #[test]
    fn switch_intent_overrides_guards() {
        let g = DialogueGraph::parse(GRAPH, "t").unwrap();
        let mut ctx = Context::new("s");
        ctx.set_cursor(Some(DialogueCursor { topic: "movies".into(), state: "greet".into() }));
        let o = moved(step(&g, &mut ctx, &ann("yes tell me a joke"), Some("tell_joke")));
        assert_eq!(o.entry, Entry::Switch("tell_joke".into()));
        assert_eq!(o.visited, vec!["joke"]);
        assert_eq!(ctx.cursor().unwrap().state, "joke");
    }

    #[test]
    fn no_transition_keeps_cursor() {
        let g = DialogueGraph::parse(GRAPH, "t").unwrap();
        let mut ctx = Context::new("s");
        ctx.set_cursor(Some(DialogueCursor { topic: "movies".into(), state: "greet".into() }));
        let r = step(&g, &mut ctx, &ann("what is the weather"), None);
        assert!(matches!(r, StepResult::NoTransition { ref state, .. } if state == "greet"));
        assert_eq!(ctx.cursor().unwrap().state, "greet");
    }

    #[test]
    fn corrupted_cursor_is_reported() {
        let g = DialogueGraph::parse(GRAPH, "t").unwrap();
        let mut ctx = Context::new("s");
        ctx.set_cursor(Some(DialogueCursor { topic: "movies".into(), state: "gone".into() }));
        let yn = YesNoClassifier::default();
        let env = DialogueEnv { intents: None, intent_threshold: 0.75, yes_no: &yn };
        let err = step_dialogue(&g, &mut ctx, &ann("yes"), &env, &mut Recorder::default()).unwrap_err();
        assert_eq!(err, DialogueError::CorruptedCursor { topic: "movies".into(), state: "gone".into() });
    }

    #[test]
    fn runaway_chain_is_an_error() {
        let text = "topic: t\ninitial: a\nstates:\n  - id: a\n    action: noop\n    transitions: [\"default -> b\"]\n  - id: b\n    action: noop\n    transitions: [\"default -> a\"]\n";
        let g = DialogueGraph::parse(text, "t").unwrap();
        let yn = YesNoClassifier::default();
        let env = DialogueEnv { intents: None, intent_threshold: 0.75, yes_no: &yn };
        let err = step_dialogue(&g, &mut Context::new("s"), &ann("x"), &env, &mut Recorder::default()).unwrap_err();
        assert!(matches!(err, DialogueError::Loop { .. }));
    }

    #[test]
    fn entity_expression_falls_back_to_topic_memory() {
        let mut ctx = Context::new("s");
        ctx.set_topic_memory("movies", TopicMemory { last_state: "x".into(), last_entity: Some("Alien".into()) });
        assert_eq!(evaluate(&ValueExpr::Entity, &ctx, &ann("it"), "movies"), Some(Value::Text("Alien".into())));
        assert_eq!(evaluate(&ValueExpr::Entity, &ctx, &ann("it"), "music"), None);
        assert_eq!(evaluate(&ValueExpr::Text, &ctx, &ann("hi there"), "m"), Some(Value::Text("hi there".into())));
    }
}
