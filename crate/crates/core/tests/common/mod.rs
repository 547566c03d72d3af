#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use parley_core::analysis::AsrToken;
use parley_core::config::Config;
use parley_core::engine::{Engine, Resources};
use parley_core::turn::{TurnRequest, WireHypothesis};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// The repository config with persistence under `data_dir`.
pub fn config(data_dir: &Path) -> Config {
    let mut c = Config::load(&repo_root().join("parley.toml")).unwrap();
    c.data_dir = data_dir.to_path_buf();
    c
}

pub fn resources() -> Arc<Resources> {
    let dir = tempfile::tempdir().unwrap();
    Arc::new(Resources::load(&config(dir.path())).unwrap())
}

/// A persisting engine over shared resources.
pub fn engine(res: &Arc<Resources>, data_dir: &Path) -> Engine {
    Engine::new(res.clone()).with_data_dir(data_dir)
}

/// One hypothesis where every token carries `confidence`.
pub fn spoken(text: &str, confidence: f64) -> TurnRequest {
    TurnRequest {
        text: String::new(),
        asr_hypotheses: Some(vec![WireHypothesis {
            tokens: text.split_whitespace().map(|w| AsrToken { text: w.to_string(), confidence }).collect(),
        }]),
        user_id: None,
    }
}
