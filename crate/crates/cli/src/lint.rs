use std::collections::BTreeMap;
use std::path::Path;

use parley_core::config::Config;
use parley_core::dialogue::{lint_graph, DialogueGraph, GraphError};
use parley_core::engine::graph_files;
use parley_core::nlg::TemplateSet;

/// Prints one line per finding; a file that fails to parse is reported and
/// skipped.
pub fn run(config: &Config, dir: Option<&Path>) -> anyhow::Result<bool> {
    let default_dir = config.fixture(&config.files.dialogues);
    let dir = dir.unwrap_or(&default_dir);
    let templates_path = config.fixture(&config.files.templates);
    let mut problems = 0;
    let shared = match TemplateSet::load(&templates_path) {
        Ok(t) => t,
        Err(e) => {
            println!("{}: {e}", templates_path.display());
            problems += 1;
            TemplateSet::default()
        }
    };
    let files = graph_files(dir).map_err(|e| anyhow::anyhow!("reading {}: {e}", dir.display()))?;
    let mut topics: BTreeMap<String, String> = BTreeMap::new();
    for file in &files {
        let name = file.display().to_string();
        let graph = match DialogueGraph::load(file) {
            Ok(g) => g,
            Err(GraphError::Parse { line: Some(line), message, .. }) => {
                println!("{name}:{line}: {message}");
                problems += 1;
                continue;
            }
            Err(e) => {
                println!("{name}: {}", strip_prefix(&e.to_string(), file));
                problems += 1;
                continue;
            }
        };
        if let Some(other) = topics.insert(graph.topic.clone(), name.clone()) {
            println!("{name}: topic {:?} is also defined in {other}", graph.topic);
            problems += 1;
        }
        for finding in lint_graph(&graph, &shared) {
            println!("{name}: {finding}");
            problems += 1;
        }
    }
    eprintln!("{} graph file(s), {problems} finding(s)", files.len());
    Ok(problems == 0)
}

// graph errors already start with the file name
fn strip_prefix<'a>(message: &'a str, file: &Path) -> &'a str {
    let stem = file.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    [file.display().to_string(), stem]
        .iter()
        .find_map(|p| message.strip_prefix(p.as_str()).and_then(|m| m.strip_prefix(": ")))
        .unwrap_or(message)
}
