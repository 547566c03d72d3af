//! Engine and server configuration: one TOML file plus `PARLEY_*`
//! environment overrides.
//!
//! Relative `data_dir`, `fixtures` and `static_dir` paths are resolved
//! against the directory of the config file; paths under `[files]` are
//! resolved against `fixtures`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dialogue::DEFAULT_TRIGGERS;
use crate::intent::{LogRegConfig, Method};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {var}={value:?}: {reason}")]
    Env { var: String, value: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureFiles {
    pub casing: PathBuf,
    pub closed_class: PathBuf,
    pub blacklist: PathBuf,
    pub keywords: PathBuf,
    pub concepts: PathBuf,
    pub labels: PathBuf,
    pub facts: PathBuf,
    pub intents: PathBuf,
    pub handcrafted: PathBuf,
    pub chitchat: PathBuf,
    pub generic: PathBuf,
    pub qa: PathBuf,
    pub templates: PathBuf,
    pub embeddings: PathBuf,
    pub dialogues: PathBuf,
}

impl Default for FixtureFiles {
    fn default() -> Self {
        let p = PathBuf::from;
        Self {
            casing: p("lexicons/casing.tsv"),
            closed_class: p("lexicons/closed_class.tsv"),
            blacklist: p("lexicons/blacklist.txt"),
            keywords: p("lexicons/keywords.tsv"),
            concepts: p("knowledge/concepts.tsv"),
            labels: p("knowledge/labels.tsv"),
            facts: p("knowledge/facts.tsv"),
            intents: p("corpora/intents.tsv"),
            handcrafted: p("corpora/handcrafted.tsv"),
            chitchat: p("corpora/chitchat.tsv"),
            generic: p("corpora/generic.txt"),
            qa: p("corpora/qa.tsv"),
            templates: p("templates.yaml"),
            embeddings: p("embeddings.txt"),
            dialogues: p("dialogues"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub port: u16,
    pub data_dir: PathBuf,
    pub fixtures: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub asr_threshold: f64,
    pub classifier: Method,
    pub classifier_floor: f64,
    pub dialogue_intent_threshold: f64,
    pub handcrafted_threshold: f64,
    pub qa_threshold: f64,
    pub topic_triggers: Vec<String>,
    /// Embedding files larger than this are read with a vocabulary filter.
    pub embedding_filter_bytes: u64,
    /// Training parameters of the top-level logistic regression.
    pub logreg: LogRegConfig,
    pub files: FixtureFiles,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            port: 8080,
            data_dir: PathBuf::from("data"),
            fixtures: PathBuf::from("fixtures"),
            static_dir: None,
            asr_threshold: 0.7,
            classifier: Method::Logreg,
            classifier_floor: 0.5,
            dialogue_intent_threshold: 0.75,
            handcrafted_threshold: 0.3,
            qa_threshold: 0.4,
            topic_triggers: DEFAULT_TRIGGERS.iter().map(|s| s.to_string()).collect(),
            embedding_filter_bytes: 64 * 1024 * 1024,
            logreg: LogRegConfig::default(),
            files: FixtureFiles::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut config: Config = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data_dir = base.join(&config.data_dir);
        config.fixtures = base.join(&config.fixtures);
        config.static_dir = config.static_dir.map(|d| base.join(d));
        config.validate()?;
        Ok(config)
    }

    /// The file at `path` when given, defaults otherwise; then environment
    /// overrides.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    /// Overrides from `PARLEY_PORT`, `PARLEY_DATA_DIR`, `PARLEY_FIXTURES`,
    /// `PARLEY_ASR_THRESHOLD`, `PARLEY_CLASSIFIER` and `PARLEY_SEED`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parsed<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                var: name.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            })
        }
        if let Some(v) = var("PARLEY_PORT") {
            self.port = parsed("PARLEY_PORT", &v)?;
        }
        if let Some(v) = var("PARLEY_DATA_DIR") {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = var("PARLEY_FIXTURES") {
            self.fixtures = PathBuf::from(v);
        }
        if let Some(v) = var("PARLEY_ASR_THRESHOLD") {
            self.asr_threshold = parsed("PARLEY_ASR_THRESHOLD", &v)?;
        }
        if let Some(v) = var("PARLEY_CLASSIFIER") {
            self.classifier = parsed("PARLEY_CLASSIFIER", &v)?;
        }
        if let Some(v) = var("PARLEY_SEED") {
            self.seed = parsed("PARLEY_SEED", &v)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("asr_threshold", self.asr_threshold),
            ("classifier_floor", self.classifier_floor),
            ("dialogue_intent_threshold", self.dialogue_intent_threshold),
            ("handcrafted_threshold", self.handcrafted_threshold),
            ("qa_threshold", self.qa_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.logreg.epochs == 0
            || self.logreg.learning_rate.is_nan()
            || self.logreg.learning_rate <= 0.0
            || self.logreg.l2.is_nan()
            || self.logreg.l2 < 0.0
        {
            return Err(ConfigError::Invalid(format!("bad [logreg] section: {:?}", self.logreg)));
        }
        Ok(())
    }

    /// Absolute location of a fixture file.
    pub fn fixture(&self, relative: &Path) -> PathBuf {
        self.fixtures.join(relative)
    }
}
