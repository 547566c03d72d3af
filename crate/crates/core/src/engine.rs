//! The conversational pipeline: analysis, routing, response production,
//! realization, persistence and logging for one turn at a time.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::analysis::{
    normalized_words, tokenize, AnalysisError, Analyzer, Annotations, Annotator, AsrGateConfig, Blacklist,
    CasingLexicon, ClosedClassLexicon, KeywordLists, RuleAnnotator,
};
use crate::config::Config;
use crate::context::{Context, PersistenceError, Scope, SnapshotStore, Value};
use crate::dialogue::{
    evaluate, route_turn, step_dialogue, Action, ActionExecutor, DialogueEnv, DialogueError, DialogueGraph, Gate,
    Module, RouterConfig, State, StepResult, TopicCatalog, YesNoClassifier,
};
use crate::intent::{
    load_corpus, train_classifier, EmbeddingClassifier, EmbeddingTable, IntentClassifier, LabeledExample, TrainingSetup,
};
use crate::knowledge::{ConceptIndex, FactStore, LabelIndex, DEFAULT_MAX_LABEL_DISTANCE};
use crate::metrics::{topics_visited, LogError, LogRecord, RatingRecord, SessionLog};
use crate::nlg::{render, TemplateSet};
use crate::responders::{
    factoid_answer, load_handcrafted, load_lines, load_pairs, load_qa, Category, ChitchatResponder,
    HandcraftedResponder, QaResponder,
};
use crate::rng::SplitMix64;
use crate::turn::{RequestError, TurnRequest, TurnResponse, TurnTrace};

/// Templates the engine itself needs in the shared template file.
pub const REQUIRED_TEMPLATES: [&str; 2] = ["repeat_request", "refuse_profanity"];

/// Fallback label of the top-level classifier for queries with no known terms.
pub const CLASSIFIER_FALLBACK: &str = "chitchat";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("loading {what} from {}: {message}", path.display())]
    Fixture { what: &'static str, path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid turn: {0}")]
    Request(#[from] RequestError),
    #[error("invalid turn: {0}")]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("engine has no data directory")]
    NoStore,
}

pub struct TopicDialogue {
    pub graph: DialogueGraph,
    /// Nearest-example classifier over the graph's intent examples.
    pub intents: Option<EmbeddingClassifier>,
}

/// Immutable fixtures and trained models shared by all sessions.
pub struct Resources {
    pub config: Config,
    pub analyzer: Analyzer,
    pub concepts: ConceptIndex,
    pub labels: LabelIndex,
    pub facts: FactStore,
    pub embeddings: Arc<EmbeddingTable>,
    pub classifier: Box<dyn IntentClassifier>,
    pub dialogues: BTreeMap<String, TopicDialogue>,
    pub templates: TemplateSet,
    pub router: RouterConfig,
    pub catalog: TopicCatalog,
    pub personal: HandcraftedResponder,
    pub opinion: HandcraftedResponder,
    pub qa: QaResponder,
    pub chitchat: ChitchatResponder,
    pub yes_no: YesNoClassifier,
}

fn fixture<T, E: std::fmt::Display>(what: &'static str, path: &Path, r: Result<T, E>) -> Result<T, LoadError> {
    r.map_err(|e| LoadError::Fixture { what, path: path.to_path_buf(), message: e.to_string() })
}

/// Dialogue graph files (`*.yaml`, `*.yml`) in `dir`, sorted by name.
pub fn graph_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "yaml" || x == "yml"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_graphs(dir: &Path) -> Result<Vec<DialogueGraph>, LoadError> {
    let files = fixture("dialogue graphs", dir, graph_files(dir))?;
    let mut graphs: Vec<DialogueGraph> = Vec::new();
    for f in files {
        let g = fixture("dialogue graph", &f, DialogueGraph::load(&f))?;
        if graphs.iter().any(|o| o.topic == g.topic) {
            return Err(LoadError::Invalid(format!("{}: topic {:?} is defined twice", f.display(), g.topic)));
        }
        graphs.push(g);
    }
    Ok(graphs)
}

impl Resources {
    pub fn load(config: &Config) -> Result<Self, LoadError> {
        let files = &config.files;
        let at = |p: &PathBuf| config.fixture(p);

        let p = at(&files.casing);
        let casing = fixture("casing lexicon", &p, CasingLexicon::load(&p))?;
        let p = at(&files.closed_class);
        let closed = fixture("closed-class lexicon", &p, ClosedClassLexicon::load(&p))?;
        let annotator = RuleAnnotator { casing, closed };
        let p = at(&files.blacklist);
        let blacklist = fixture("blacklist", &p, Blacklist::load(&p))?;
        let p = at(&files.keywords);
        let mut keywords = fixture("topic keywords", &p, KeywordLists::load(&p))?;

        let p = at(&files.concepts);
        let concepts = fixture("concept index", &p, ConceptIndex::load(&p))?;
        let p = at(&files.labels);
        let labels = fixture("label index", &p, LabelIndex::load(&p))?;
        let p = at(&files.facts);
        let facts = fixture("facts", &p, FactStore::load(&p))?;

        let p = at(&files.templates);
        let templates = fixture("templates", &p, TemplateSet::load(&p))?;
        if let Some(missing) = REQUIRED_TEMPLATES.iter().find(|t| !templates.contains(t)) {
            return Err(LoadError::Fixture {
                what: "templates",
                path: p,
                message: format!("template {missing:?} is required"),
            });
        }

        let graphs = load_graphs(&at(&files.dialogues))?;
        for g in &graphs {
            for k in &g.keywords {
                keywords.insert(&g.topic, k);
            }
        }

        let p = at(&files.intents);
        let intents = fixture("intent corpus", &p, load_corpus(&p, &annotator))?;
        let p = at(&files.handcrafted);
        let handcrafted = fixture("handcrafted responses", &p, load_handcrafted(&p))?;
        let p = at(&files.chitchat);
        let chitchat_pairs = fixture("chit-chat corpus", &p, load_pairs(&p))?;
        let p = at(&files.generic);
        let generic = fixture("generic responses", &p, load_lines(&p))?;
        let p = at(&files.qa);
        let qa_pairs = fixture("question-answer pairs", &p, load_qa(&p))?;

        let p = at(&files.embeddings);
        let size = fixture("embeddings", &p, std::fs::metadata(&p))?.len();
        let embeddings = if size > config.embedding_filter_bytes {
            let mut vocab: HashSet<String> = HashSet::new();
            let mut add = |text: &str| vocab.extend(normalized_words(&tokenize(text)));
            intents.iter().for_each(|e| add(&e.text));
            chitchat_pairs.iter().for_each(|(m, _)| add(m));
            handcrafted.iter().for_each(|e| add(&e.prompt));
            qa_pairs.iter().for_each(|q| add(&q.question));
            graphs.iter().flat_map(|g| g.intent_examples.values().flatten()).for_each(|t| add(t));
            fixture("embeddings", &p, EmbeddingTable::load_filtered(&p, Some(&vocab)))?
        } else {
            fixture("embeddings", &p, EmbeddingTable::load(&p))?
        };
        let embeddings = Arc::new(embeddings);

        let setup = TrainingSetup {
            embeddings: Some(embeddings.clone()),
            fallback: CLASSIFIER_FALLBACK.to_string(),
            logreg: config.logreg,
            ..TrainingSetup::default()
        };
        let classifier =
            fixture("intent classifier", &at(&files.intents), train_classifier(config.classifier, &intents, &setup))?;

        let mut catalog = TopicCatalog::default();
        let mut dialogues = BTreeMap::new();
        for graph in graphs {
            let examples: Vec<LabeledExample> = graph
                .intent_examples
                .iter()
                .flat_map(|(label, texts)| texts.iter().map(move |t| (label, t)))
                .map(|(label, t)| LabeledExample::new(label, t, &annotator))
                .collect();
            let intents = if examples.is_empty() {
                None
            } else {
                let source = graph.source.clone().unwrap_or_default();
                Some(fixture(
                    "dialogue intents",
                    &source,
                    EmbeddingClassifier::fit(embeddings.clone(), &examples, "none"),
                )?)
            };
            catalog.insert(&graph.topic, graph.concepts.iter().cloned());
            dialogues.insert(graph.topic.clone(), TopicDialogue { graph, intents });
        }

        let p = at(&files.handcrafted);
        let personal = fixture(
            "handcrafted responses",
            &p,
            HandcraftedResponder::new(Category::Personal, &handcrafted, &annotator, config.handcrafted_threshold),
        )?;
        let opinion = fixture(
            "handcrafted responses",
            &p,
            HandcraftedResponder::new(Category::Opinion, &handcrafted, &annotator, config.handcrafted_threshold),
        )?;
        let p = at(&files.qa);
        let qa = fixture("question-answer pairs", &p, QaResponder::new(qa_pairs, &annotator, config.qa_threshold))?;
        let p = at(&files.chitchat);
        let chitchat =
            fixture("chit-chat corpus", &p, ChitchatResponder::new(chitchat_pairs, generic, embeddings.clone()))?;

        Ok(Self {
            config: config.clone(),
            analyzer: Analyzer {
                annotator: Box::new(annotator),
                blacklist,
                keywords,
                asr: AsrGateConfig { threshold: config.asr_threshold },
            },
            concepts,
            labels,
            facts,
            yes_no: YesNoClassifier::default().with_embeddings(embeddings.clone()),
            embeddings,
            classifier,
            dialogues,
            templates,
            router: RouterConfig::new(config.classifier_floor, config.topic_triggers.iter().map(String::as_str)),
            catalog,
            personal,
            opinion,
            qa,
            chitchat,
        })
    }

    pub fn annotator(&self) -> &dyn Annotator {
        &*self.analyzer.annotator
    }

    pub fn analyze(&self, request: &TurnRequest) -> Result<Annotations, EngineError> {
        let hyps = request.hypotheses()?;
        Ok(self.analyzer.analyze(&hyps, &self.concepts, &self.labels)?)
    }
}

/// Runs state actions against the engine's templates and knowledge.
struct Executor<'a> {
    res: &'a Resources,
    rng: &'a mut SplitMix64,
    response: Option<String>,
}

impl ActionExecutor for Executor<'_> {
    fn execute(
        &mut self,
        graph: &DialogueGraph,
        state: &State,
        ctx: &mut Context,
        ann: &Annotations,
    ) -> Result<(), DialogueError> {
        let fail = |message: String| DialogueError::Action { state: state.id.clone(), message };
        match &state.action {
            Action::Respond { template } => {
                let t = graph
                    .templates
                    .get(template)
                    .or_else(|| self.res.templates.get(template))
                    .ok_or_else(|| fail(format!("template {template:?} is not defined")))?;
                self.response = Some(render(t, ctx, self.rng.next_u64()).map_err(|e| fail(e.to_string()))?);
            }
            Action::Remember { scope, key, value } => {
                if let Some(v) = evaluate(value, ctx, ann, &graph.topic) {
                    ctx.remember(*scope, key, v).map_err(|e| fail(e.to_string()))?;
                }
            }
            Action::FetchFacts { entity, topic } => {
                let Some(v) = evaluate(entity, ctx, ann, &graph.topic) else {
                    return Ok(());
                };
                let name = v.render();
                let name = match self.res.labels.lookup(&name, DEFAULT_MAX_LABEL_DISTANCE) {
                    Some(m) => m.canonical_label,
                    None => name,
                };
                let mut told = match ctx.recall(Scope::Session, "facts_told") {
                    Some(Value::List(items)) => items.clone(),
                    _ => Vec::new(),
                };
                let topic = topic.as_deref().unwrap_or(&graph.topic);
                let fact = self.res.facts.get_facts(&name, topic).into_iter().find(|f| !told.contains(&f.text));
                if let Some(f) = fact {
                    told.push(f.text.clone());
                    ctx.remember(Scope::Turn, "fact", f.text.as_str()).map_err(|e| fail(e.to_string()))?;
                    ctx.remember(Scope::Turn, "fact_entity", f.entity.as_str()).map_err(|e| fail(e.to_string()))?;
                    ctx.remember(Scope::Session, "facts_told", Value::List(told)).map_err(|e| fail(e.to_string()))?;
                }
            }
            Action::Noop => {}
        }
        Ok(())
    }
}

/// One engine serves many sessions; each call works on a caller-held context.
pub struct Engine {
    res: Arc<Resources>,
    seed: u64,
    store: Option<SnapshotStore>,
    log: Option<SessionLog>,
}

struct Produced {
    response: String,
    responder: String,
    state: Option<String>,
    states: Vec<String>,
    intent: Option<String>,
}

impl Engine {
    /// An engine without persistence.
    pub fn new(res: Arc<Resources>) -> Self {
        let seed = res.config.seed;
        Self { res, seed, store: None, log: None }
    }

    /// Snapshots and logs under `data_dir`.
    pub fn with_data_dir(mut self, data_dir: &Path) -> Self {
        self.store = Some(SnapshotStore::new(data_dir));
        self.log = Some(SessionLog::new(data_dir));
        self
    }

    /// Loads resources and persists under the configured data directory.
    pub fn load(config: &Config) -> Result<Self, LoadError> {
        let res = Arc::new(Resources::load(config)?);
        Ok(Self::new(res).with_data_dir(&config.data_dir))
    }

    pub fn resources(&self) -> &Arc<Resources> {
        &self.res
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn store(&self) -> Option<&SnapshotStore> {
        self.store.as_ref()
    }

    pub fn log(&self) -> Option<&SessionLog> {
        self.log.as_ref()
    }

    /// A fresh context, carrying the user's long-term scope, saved at once
    /// when the engine persists.
    pub fn create_session(&self, session_id: &str, user_id: Option<String>) -> Result<Context, EngineError> {
        match &self.store {
            Some(store) => {
                let ctx = store.open_session(session_id, user_id)?;
                store.save(&ctx)?;
                Ok(ctx)
            }
            None => Ok(Context::new(session_id).with_user(user_id)),
        }
    }

    /// The saved context of an existing session.
    pub fn open_session(&self, session_id: &str) -> Result<Option<Context>, EngineError> {
        match &self.store {
            Some(store) if store.exists(session_id) => Ok(Some(store.restore(session_id)?)),
            _ => Ok(None),
        }
    }

    /// Runs one turn, then saves the context and appends the log record.
    /// Persistence failures become warnings; the response stands.
    pub fn post_turn(
        &self,
        ctx: &mut Context,
        request: &TurnRequest,
        received_ms: u64,
    ) -> Result<TurnResponse, EngineError> {
        let mut response = self.respond(ctx, request)?;
        if let Some(store) = &self.store {
            if let Err(e) = store.save(ctx) {
                response.warnings.push(format!("snapshot not saved: {e}"));
            }
        }
        if let Some(log) = &self.log {
            let record = LogRecord {
                session_id: ctx.session_id().to_string(),
                turn_counter: response.turn_counter,
                received_ms,
                text: request.hypotheses().map(|h| h[0].text()).unwrap_or_default(),
                response: response.response.clone(),
                trace: response.trace.clone(),
            };
            if let Err(e) = log.append(&record) {
                response.warnings.push(format!("turn not logged: {e}"));
            }
        }
        Ok(response)
    }

    /// Stores a 1..5 rating attributed to every topic the session visited.
    pub fn submit_rating(&self, session_id: &str, stars: i64, submitted_ms: u64) -> Result<RatingRecord, EngineError> {
        let log = self.log.as_ref().ok_or(EngineError::NoStore)?;
        let topics = topics_visited(&log.session(session_id)?);
        let record = RatingRecord::new(session_id, stars, topics, submitted_ms)?;
        log.append_rating(&record)?;
        Ok(record)
    }

    /// Runs one turn on `ctx` without persisting it. The turn counter of
    /// the context advances by one.
    pub fn respond(&self, ctx: &mut Context, request: &TurnRequest) -> Result<TurnResponse, EngineError> {
        let res = &*self.res;
        let ann = res.analyze(request)?;
        ctx.begin_turn();
        let mut rng = SplitMix64::derive(self.seed, ctx.turn_counter());
        let mut warnings = Vec::new();

        let decision = route_turn(ctx, &ann, &*res.classifier, &res.router, &res.catalog);
        let routed_intent = decision.intent.as_ref().map(|c| c.label.clone());
        let produced = match decision.module {
            Module::StructuredTopic => {
                let topic = decision.topic.as_deref().expect("structured decisions carry a topic");
                if decision.decided_by == Gate::TopicRequest {
                    // an explicit request (re)starts the topic from its initial state
                    ctx.set_cursor(None);
                }
                self.run_dialogue(topic, ctx, &ann, &mut rng, &mut warnings)
            }
            Module::Chitchat => self.chitchat(&ann, &mut rng),
            Module::QuestionAnswering => {
                if let Some(a) = factoid_answer(&res.facts, &res.labels, &ann) {
                    Produced::simple(a.text, "factoid")
                } else if let Some(r) = res.qa.answer(&ann.tokens) {
                    Produced::simple(r.response, "news_qa")
                } else {
                    self.chitchat(&ann, &mut rng)
                }
            }
            Module::PersonalInfo | Module::Opinion => {
                let responder = if decision.module == Module::PersonalInfo { &res.personal } else { &res.opinion };
                match responder.answer(&ann.tokens) {
                    Some(r) => Produced::simple(r.response, decision.module.as_str()),
                    None => self.chitchat(&ann, &mut rng),
                }
            }
            Module::RepeatRequest | Module::RefuseProfanity => {
                self.shared_template(decision.module.as_str(), ctx, &mut rng, &mut warnings, &ann)
            }
        };

        ctx.end_turn();
        let trace = TurnTrace {
            module: decision.module,
            topic: decision.topic,
            state: produced.state,
            intent: produced.intent.or(routed_intent),
            confident: ann.confident,
            profane: ann.profane,
            responder: produced.responder,
            steps: decision.trace,
            states: produced.states,
        };
        Ok(TurnResponse {
            session_id: ctx.session_id().to_string(),
            response: produced.response,
            trace,
            turn_counter: ctx.turn_counter(),
            warnings,
        })
    }

    fn chitchat(&self, ann: &Annotations, rng: &mut SplitMix64) -> Produced {
        Produced::simple(self.res.chitchat.reply(&ann.tokens, rng.next_u64()).response, "chitchat")
    }

    fn shared_template(
        &self,
        id: &str,
        ctx: &Context,
        rng: &mut SplitMix64,
        warnings: &mut Vec<String>,
        ann: &Annotations,
    ) -> Produced {
        match self.res.templates.render(id, ctx, rng.next_u64()) {
            Ok(text) => Produced::simple(text, id),
            Err(e) => {
                warnings.push(e.to_string());
                self.chitchat(ann, rng)
            }
        }
    }

    /// Chit-chat, or a repeat request when the input was not understood.
    fn fallback(&self, ctx: &Context, ann: &Annotations, rng: &mut SplitMix64, warnings: &mut Vec<String>) -> Produced {
        if ann.confident {
            self.chitchat(ann, rng)
        } else {
            self.shared_template("repeat_request", ctx, rng, warnings, ann)
        }
    }

    fn run_dialogue(
        &self,
        topic: &str,
        ctx: &mut Context,
        ann: &Annotations,
        rng: &mut SplitMix64,
        warnings: &mut Vec<String>,
    ) -> Produced {
        let res = &*self.res;
        let td = &res.dialogues[topic];
        let env = DialogueEnv {
            intents: td.intents.as_ref().map(|c| c as &dyn IntentClassifier),
            intent_threshold: res.config.dialogue_intent_threshold,
            yes_no: &res.yes_no,
        };
        let step = |ctx: &mut Context, rng: &mut SplitMix64| {
            let mut exec = Executor { res, rng, response: None };
            let r = step_dialogue(&td.graph, ctx, ann, &env, &mut exec);
            (r, exec.response)
        };
        let (mut result, mut response) = step(ctx, rng);
        if let Err(e @ DialogueError::CorruptedCursor { .. }) = &result {
            warnings.push(format!("{e}; restarting the topic"));
            ctx.set_cursor(None);
            (result, response) = step(ctx, rng);
        }
        match result {
            Ok(StepResult::Moved(o)) => {
                let intent = o.intent.as_ref().map(|c| c.label.clone());
                let mut p = match response {
                    Some(text) => Produced::simple(text, "structured_topic"),
                    None => self.fallback(ctx, ann, rng, warnings),
                };
                p.state = Some(o.state().to_string());
                p.states = o.visited;
                p.intent = intent;
                p
            }
            Ok(StepResult::NoTransition { state, intent }) => {
                let mut p = self.fallback(ctx, ann, rng, warnings);
                p.state = Some(state);
                p.intent = intent.map(|c| c.label);
                p
            }
            Err(e) => {
                warnings.push(format!("dialogue {topic}: {e}"));
                ctx.set_cursor(None);
                self.fallback(ctx, ann, rng, warnings)
            }
        }
    }
}

impl Produced {
    fn simple(response: String, responder: &str) -> Self {
        Self { response, responder: responder.to_string(), state: None, states: Vec::new(), intent: None }
    }
}
