//! Per-session layered memory and its on-disk snapshots.
//!
//! A [`Context`] carries three scopes with different lifetimes: the turn
//! scope is wiped by [`Context::begin_turn`], the session scope lives as long
//! as the session, and the long-term scope follows the user across sessions.
//! Only the session and long-term scopes, the dialogue cursor and per-topic
//! memory are persisted.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::knowledge::EntityRecord;

pub const SNAPSHOT_SCHEMA: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Text(String),
    Number(f64),
    Bool(bool),
    List(Vec<String>),
    Entity(EntityRecord),
}

impl Value {
    /// Surface form used when the value fills a template placeholder.
    pub fn render(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Number(n) if n.fract() == 0.0 && n.abs() < 1e15 => format!("{}", *n as i64),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::List(items) => items.join(", "),
            Value::Entity(e) => e.label.clone(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Turn,
    Session,
    LongTerm,
}

impl std::str::FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "turn" => Ok(Scope::Turn),
            "session" => Ok(Scope::Session),
            "long_term" => Ok(Scope::LongTerm),
            other => Err(format!("unknown scope {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueCursor {
    pub topic: String,
    pub state: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicMemory {
    pub last_state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_entity: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("context key must not be empty")]
    EmptyKey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    session_id: String,
    user_id: Option<String>,
    turn_counter: u64,
    turn: BTreeMap<String, Value>,
    session: BTreeMap<String, Value>,
    long_term: BTreeMap<String, Value>,
    cursor: Option<DialogueCursor>,
    topic_memory: BTreeMap<String, TopicMemory>,
}

impl Context {
    /// Panics if `session_id` is empty.
    pub fn new(session_id: impl Into<String>) -> Self {
        let session_id = session_id.into();
        assert!(!session_id.is_empty(), "session id must be non-empty");
        Self {
            session_id,
            user_id: None,
            turn_counter: 0,
            turn: BTreeMap::new(),
            session: BTreeMap::new(),
            long_term: BTreeMap::new(),
            cursor: None,
            topic_memory: BTreeMap::new(),
        }
    }

    pub fn with_user(mut self, user_id: Option<String>) -> Self {
        self.user_id = user_id.filter(|u| !u.is_empty());
        self
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn user_id(&self) -> Option<&str> {
        self.user_id.as_deref()
    }

    pub fn turn_counter(&self) -> u64 {
        self.turn_counter
    }

    /// Clears the turn scope.
    pub fn begin_turn(&mut self) {
        self.turn.clear();
    }

    /// Counts a completed turn.
    pub fn end_turn(&mut self) {
        self.turn_counter += 1;
    }

    /// Long-term writes without a user id land in the session scope.
    pub fn remember(&mut self, scope: Scope, key: &str, value: impl Into<Value>) -> Result<(), ContextError> {
        if key.is_empty() {
            return Err(ContextError::EmptyKey);
        }
        self.scope_mut(scope).insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn recall(&self, scope: Scope, key: &str) -> Option<&Value> {
        self.scope(scope).get(key)
    }

    /// Most specific scope first: turn, session, long-term.
    pub fn lookup(&self, key: &str) -> Option<&Value> {
        self.turn.get(key).or_else(|| self.session.get(key)).or_else(|| self.long_term.get(key))
    }

    pub fn forget(&mut self, scope: Scope, key: &str) -> Option<Value> {
        self.scope_mut(scope).remove(key)
    }

    pub fn scope(&self, scope: Scope) -> &BTreeMap<String, Value> {
        match scope {
            Scope::Turn => &self.turn,
            Scope::Session => &self.session,
            Scope::LongTerm => &self.long_term,
        }
    }

    fn scope_mut(&mut self, scope: Scope) -> &mut BTreeMap<String, Value> {
        match scope {
            Scope::Turn => &mut self.turn,
            Scope::Session => &mut self.session,
            Scope::LongTerm if self.user_id.is_some() => &mut self.long_term,
            Scope::LongTerm => &mut self.session,
        }
    }

    pub fn cursor(&self) -> Option<&DialogueCursor> {
        self.cursor.as_ref()
    }

    pub fn set_cursor(&mut self, cursor: Option<DialogueCursor>) {
        self.cursor = cursor;
    }

    pub fn topic_memory(&self, topic: &str) -> Option<&TopicMemory> {
        self.topic_memory.get(topic)
    }

    pub fn set_topic_memory(&mut self, topic: &str, memory: TopicMemory) {
        self.topic_memory.insert(topic.to_string(), memory);
    }

    pub fn snapshot(&self) -> ContextSnapshot {
        ContextSnapshot {
            schema: SNAPSHOT_SCHEMA.to_string(),
            session_id: self.session_id.clone(),
            user_id: self.user_id.clone(),
            turn_counter: self.turn_counter,
            session_scope: self.session.clone(),
            long_term_scope: self.long_term.clone(),
            cursor: self.cursor.clone(),
            topic_memory: self.topic_memory.clone(),
        }
    }

    pub fn from_snapshot(snapshot: ContextSnapshot) -> Self {
        Self {
            session_id: snapshot.session_id,
            user_id: snapshot.user_id,
            turn_counter: snapshot.turn_counter,
            turn: BTreeMap::new(),
            session: snapshot.session_scope,
            long_term: snapshot.long_term_scope,
            cursor: snapshot.cursor,
            topic_memory: snapshot.topic_memory,
        }
    }

    pub(crate) fn replace_long_term(&mut self, long_term: BTreeMap<String, Value>) {
        self.long_term = long_term;
    }
}

/// Persisted form of a [`Context`]; the turn scope is never written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub schema: String,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    pub turn_counter: u64,
    pub session_scope: BTreeMap<String, Value>,
    pub long_term_scope: BTreeMap<String, Value>,
    pub cursor: Option<DialogueCursor>,
    #[serde(default)]
    pub topic_memory: BTreeMap<String, TopicMemory>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotId {
    pub session_id: String,
    pub turn_counter: u64,
}

impl std::fmt::Display for SnapshotId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.session_id, self.turn_counter)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PersistenceError {
    #[error("writing snapshot for session {session}: {source}")]
    Write {
        session: String,
        #[source]
        source: std::io::Error,
    },
    #[error("reading snapshot for session {session}: {source}")]
    Read {
        session: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt snapshot for session {session}: {reason}")]
    Corrupt { session: String, reason: String },
}

/// One snapshot file per session, atomically replaced on every checkpoint,
/// plus one long-term file per user.
#[derive(Debug)]
pub struct SnapshotStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SnapshotStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), locks: Mutex::new(HashMap::new()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_path(&self, session_id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{}.json", file_stem(session_id)))
    }

    fn user_path(&self, user_id: &str) -> PathBuf {
        self.root.join("users").join(format!("{}.json", file_stem(user_id)))
    }

    pub fn exists(&self, session_id: &str) -> bool {
        self.session_path(session_id).is_file()
    }

    fn lock_for(&self, session_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(session_id.to_string()).or_default().clone()
    }

    /// Increments the turn counter, then writes the snapshot. The counter
    /// stays incremented even when the write fails.
    pub fn checkpoint(&self, ctx: &mut Context) -> Result<SnapshotId, PersistenceError> {
        ctx.end_turn();
        self.save(ctx)
    }

    /// Writes the snapshot without touching the counter.
    pub fn save(&self, ctx: &Context) -> Result<SnapshotId, PersistenceError> {
        let lock = self.lock_for(&ctx.session_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let snapshot = ctx.snapshot();
        let write_err = |source| PersistenceError::Write { session: ctx.session_id.clone(), source };
        let body = serde_json::to_vec_pretty(&snapshot).map_err(|e| write_err(e.into()))?;
        atomic_write(&self.session_path(&ctx.session_id), &body).map_err(write_err)?;
        if let Some(user) = &ctx.user_id {
            let body = serde_json::to_vec_pretty(&UserRecord {
                schema: SNAPSHOT_SCHEMA.to_string(),
                user_id: user.clone(),
                long_term_scope: ctx.long_term.clone(),
            })
            .map_err(|e| write_err(e.into()))?;
            atomic_write(&self.user_path(user), &body).map_err(write_err)?;
        }
        Ok(SnapshotId { session_id: ctx.session_id.clone(), turn_counter: ctx.turn_counter })
    }

    /// The saved context for `session_id`, or a fresh one if none exists.
    pub fn restore(&self, session_id: &str) -> Result<Context, PersistenceError> {
        let path = self.session_path(session_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Context::new(session_id)),
            Err(source) => return Err(PersistenceError::Read { session: session_id.to_string(), source }),
        };
        let corrupt = |reason: String| PersistenceError::Corrupt { session: session_id.to_string(), reason };
        let snapshot: ContextSnapshot = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if snapshot.schema != SNAPSHOT_SCHEMA {
            return Err(corrupt(format!("unsupported schema {:?}", snapshot.schema)));
        }
        if snapshot.session_id != session_id {
            return Err(corrupt(format!("file holds session {:?}", snapshot.session_id)));
        }
        Ok(Context::from_snapshot(snapshot))
    }

    /// A fresh context for a new session, carrying the user's long-term
    /// scope when one was persisted earlier.
    pub fn open_session(&self, session_id: &str, user_id: Option<String>) -> Result<Context, PersistenceError> {
        let mut ctx = Context::new(session_id).with_user(user_id);
        if let Some(user) = ctx.user_id.clone() {
            ctx.replace_long_term(self.load_long_term(&user, session_id)?);
        }
        Ok(ctx)
    }

    fn load_long_term(&self, user_id: &str, session_id: &str) -> Result<BTreeMap<String, Value>, PersistenceError> {
        let text = match fs::read_to_string(self.user_path(user_id)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
            Err(source) => return Err(PersistenceError::Read { session: session_id.to_string(), source }),
        };
        let record: UserRecord = serde_json::from_str(&text).map_err(|e| PersistenceError::Corrupt {
            session: session_id.to_string(),
            reason: format!("long-term record of user {user_id}: {e}"),
        })?;
        Ok(record.long_term_scope)
    }
}

#[derive(Serialize, Deserialize)]
struct UserRecord {
    schema: String,
    user_id: String,
    long_term_scope: BTreeMap<String, Value>,
}

/// Ids made of `[A-Za-z0-9_-]` are used verbatim; anything else is hex-encoded.
pub(crate) fn file_stem(id: &str) -> String {
    if !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') {
        id.to_string()
    } else {
        let hex: String = id.bytes().map(|b| format!("{b:02x}")).collect();
        format!("x{hex}")
    }
}

pub(crate) fn atomic_write(path: &Path, body: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
