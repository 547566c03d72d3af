use std::io::{BufRead, IsTerminal, Write};
use std::sync::Arc;

use anyhow::Context as _;

use parley_core::config::Config;
use parley_core::engine::{Engine, Resources};
use parley_core::turn::TurnRequest;

/// Reads one utterance per line and prints the response followed by an
/// indented trace line. The engine keeps everything in memory.
pub fn run(config: &Config, user: Option<String>) -> anyhow::Result<bool> {
    let res = Resources::load(config)?;
    let mut engine = Engine::new(Arc::new(res));
    let mut ctx = engine.create_session("repl", user)?;
    let stdin = std::io::stdin();
    let interactive = stdin.is_terminal();
    let mut out = std::io::stdout().lock();
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line.context("reading input")?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(cmd) = text.strip_prefix(':') {
            let mut parts = cmd.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("quit" | "q"), None) => break,
                (Some("seed"), Some(n)) => match n.parse() {
                    Ok(seed) => {
                        engine.set_seed(seed);
                        writeln!(out, "  [seed {seed}]")?;
                    }
                    Err(_) => writeln!(out, "  [not a seed: {n}]")?,
                },
                _ => writeln!(out, "  [commands: :quit, :seed N]")?,
            }
            continue;
        }
        match engine.post_turn(&mut ctx, &TurnRequest::text(text), 0) {
            Ok(r) => {
                writeln!(out, "{}", r.response)?;
                writeln!(out, "  [{}]", r.trace.summary())?;
            }
            Err(e) => writeln!(out, "  [error: {e}]")?,
        }
    }
    Ok(true)
}
