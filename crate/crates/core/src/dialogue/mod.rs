//! Topic dialogue graphs, the per-turn stepper and the top-level router.

mod elementary;
mod graph;
mod router;
mod runner;

pub use elementary::{Answer, YesNoClassifier};
pub use graph::{
    lint_graph, Action, DialogueGraph, Finding, FindingKind, GraphError, Guard, State, Transition, ValueExpr,
    ELEMENTARY_INTENTS,
};
pub use router::{
    detect_topic_request, route_turn, select_topic_by_entity, Gate, Module, RouterConfig, RoutingDecision,
    TopicCatalog, TopicRequest, DEFAULT_TRIGGERS, STRUCTURED_PREFIX,
};
pub use runner::{
    evaluate, step_dialogue, ActionExecutor, DialogueEnv, DialogueError, Entry, StepOutcome, StepResult,
    DEFAULT_INTENT_THRESHOLD, MAX_CHAIN,
};
