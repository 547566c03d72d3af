//! Per-session turn logs, ratings, and per-topic dialogue statistics.
//!
//! A structured-topic dialogue is a maximal run of consecutive turns routed
//! to the same topic. Its time is the difference between the receive times
//! of its first and last turns; its length is the number of turns. A session
//! rating counts once for every distinct topic the session visited; when a
//! session is rated more than once, the last rating counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::context::file_stem;
use crate::dialogue::Module;
use crate::turn::TurnTrace;

pub const REPORT_COLUMNS: [&str; 4] = ["Topic", "Rating", "Time", "Turns"];

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("stars must be between 1 and 5, got {0}")]
    Stars(i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub session_id: String,
    pub turn_counter: u64,
    /// Server receive time, milliseconds since the Unix epoch.
    pub received_ms: u64,
    pub text: String,
    pub response: String,
    pub trace: TurnTrace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub stars: u8,
    pub topics_visited: Vec<String>,
    #[serde(default)]
    pub submitted_ms: u64,
}

impl RatingRecord {
    pub fn new(session_id: &str, stars: i64, topics_visited: Vec<String>, submitted_ms: u64) -> Result<Self, LogError> {
        if !(1..=5).contains(&stars) {
            return Err(LogError::Stars(stars));
        }
        Ok(Self { session_id: session_id.to_string(), stars: stars as u8, topics_visited, submitted_ms })
    }
}

/// Distinct structured topics in order of first visit.
pub fn topics_visited<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if r.trace.module == Module::StructuredTopic {
            if let Some(t) = &r.trace.topic {
                if !out.contains(t) {
                    out.push(t.clone());
                }
            }
        }
    }
    out
}

/// Append-only JSON-lines files under `<root>/logs/<session>.jsonl` and
/// `<root>/ratings.jsonl`.
#[derive(Debug)]
pub struct SessionLog {
    root: PathBuf,
    write: Mutex<()>,
}

fn append_line(path: &Path, value: &impl Serialize) -> Result<(), LogError> {
    let io = |source| LogError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut line = serde_json::to_vec(value).map_err(|e| io(e.into()))?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    f.write_all(&line).map_err(io)
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, LogError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(LogError::Io { path: path.to_path_buf(), source }),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

impl SessionLog {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), write: Mutex::new(()) }
    }

    pub fn session_path(&self, session_id: &str) -> PathBuf {
        self.root.join("logs").join(format!("{}.jsonl", file_stem(session_id)))
    }

    pub fn ratings_path(&self) -> PathBuf {
        self.root.join("ratings.jsonl")
    }

    pub fn append(&self, record: &LogRecord) -> Result<(), LogError> {
        let _g = self.write.lock().unwrap_or_else(|e| e.into_inner());
        append_line(&self.session_path(&record.session_id), record)
    }

    pub fn append_rating(&self, rating: &RatingRecord) -> Result<(), LogError> {
        let _g = self.write.lock().unwrap_or_else(|e| e.into_inner());
        append_line(&self.ratings_path(), rating)
    }

    pub fn session(&self, session_id: &str) -> Result<Vec<LogRecord>, LogError> {
        read_lines(&self.session_path(session_id))
    }

    pub fn ratings(&self) -> Result<Vec<RatingRecord>, LogError> {
        read_lines(&self.ratings_path())
    }

    /// Every session log, in file-name order.
    pub fn all_sessions(&self) -> Result<Vec<LogRecord>, LogError> {
        let dir = self.root.join("logs");
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => return Err(LogError::Io { path: dir, source }),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for p in paths {
            out.extend(read_lines::<LogRecord>(&p)?);
        }
        Ok(out)
    }

    pub fn metrics(&self) -> Result<MetricsReport, LogError> {
        Ok(compute_metrics(&self.all_sessions()?, &self.ratings()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSpan {
    pub session_id: String,
    pub topic: String,
    pub first_turn: u64,
    pub turns: u64,
    pub elapsed_ms: u64,
}

/// Maximal runs of consecutive turns routed to one structured topic.
pub fn dialogue_spans(records: &[LogRecord]) -> Vec<DialogueSpan> {
    let mut by_session: BTreeMap<&str, Vec<&LogRecord>> = BTreeMap::new();
    for r in records {
        by_session.entry(&r.session_id).or_default().push(r);
    }
    let mut spans = Vec::new();
    for (session, mut turns) in by_session {
        turns.sort_by_key(|r| r.turn_counter);
        let mut open: Option<(DialogueSpan, u64)> = None;
        for r in turns {
            let topic = (r.trace.module == Module::StructuredTopic).then_some(r.trace.topic.as_deref()).flatten();
            match (&mut open, topic) {
                (Some((span, start_ms)), Some(t)) if span.topic == t => {
                    span.turns += 1;
                    span.elapsed_ms = r.received_ms.saturating_sub(*start_ms);
                }
                _ => {
                    spans.extend(open.take().map(|(s, _)| s));
                    if let Some(t) = topic {
                        let span = DialogueSpan {
                            session_id: session.to_string(),
                            topic: t.to_string(),
                            first_turn: r.turn_counter,
                            turns: 1,
                            elapsed_ms: 0,
                        };
                        open = Some((span, r.received_ms));
                    }
                }
            }
        }
        spans.extend(open.map(|(s, _)| s));
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub topic: String,
    /// Mean of the ratings of sessions that visited the topic.
    pub rating: Option<f64>,
    /// Mean dialogue duration in seconds.
    pub seconds: Option<f64>,
    /// Mean dialogue length in turns.
    pub turns: Option<f64>,
    pub dialogues: usize,
    pub ratings: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub topics: Vec<TopicMetrics>,
}

pub fn compute_metrics(records: &[LogRecord], ratings: &[RatingRecord]) -> MetricsReport {
    let mut last_rating: BTreeMap<&str, &RatingRecord> = BTreeMap::new();
    for r in ratings {
        last_rating.insert(&r.session_id, r);
    }
    let mut stars: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in last_rating.values() {
        let distinct: BTreeSet<&str> = r.topics_visited.iter().map(String::as_str).collect();
        for t in distinct {
            stars.entry(t).or_default().push(r.stars as f64);
        }
    }
    let spans = dialogue_spans(records);
    let mut by_topic: BTreeMap<&str, Vec<&DialogueSpan>> = BTreeMap::new();
    for s in &spans {
        by_topic.entry(&s.topic).or_default().push(s);
    }
    let topics: BTreeSet<&str> = stars.keys().chain(by_topic.keys()).copied().collect();
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let rows = topics
        .into_iter()
        .map(|t| {
            let spans = by_topic.get(t).map(Vec::as_slice).unwrap_or(&[]);
            let secs: Vec<f64> = spans.iter().map(|s| s.elapsed_ms as f64 / 1000.0).collect();
            let turns: Vec<f64> = spans.iter().map(|s| s.turns as f64).collect();
            let rated = stars.get(t).map(Vec::as_slice).unwrap_or(&[]);
            TopicMetrics {
                topic: t.to_string(),
                rating: mean(rated),
                seconds: mean(&secs),
                turns: mean(&turns),
                dialogues: spans.len(),
                ratings: rated.len(),
            }
        })
        .collect();
    MetricsReport { topics: rows }
}

impl MetricsReport {
    fn cells(&self) -> Vec<[String; 4]> {
        let opt = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map_or_else(|| "-".to_string(), f);
        self.topics
            .iter()
            .map(|m| {
                [
                    m.topic.clone(),
                    opt(m.rating, &|v| format!("{v:.3}")),
                    opt(m.seconds, &|v| format!("{v:.0} s")),
                    opt(m.turns, &|v| format!("{v:.3}")),
                ]
            })
            .collect()
    }

    /// Aligned text table; only the header when there is no data.
    pub fn to_table(&self) -> String {
        let rows = self.cells();
        let mut widths = REPORT_COLUMNS.map(str::len);
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: [&str; 4]| {
            let mut s = format!("{:<w$}", cells[0], w = widths[0]);
            for i in 1..4 {
                s.push_str(&format!("  {:>w$}", cells[i], w = widths[i]));
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(REPORT_COLUMNS);
        for r in &rows {
            out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
        }
        out
    }

    /// Tab-separated with full precision: topic, rating, seconds, turns.
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut out = REPORT_COLUMNS.join("\t") + "\n";
        for m in &self.topics {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", m.topic, opt(m.rating), opt(m.seconds), opt(m.turns)));
        }
        out
    }
}
