//! `parley`: operator tooling for the dialogue engine.
//!
//! Exit codes: 0 success, 1 findings or failures, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use parley_core::config::Config;
use parley_core::intent::Method;

mod chat;
mod eval;
mod ingest;
mod lint;
mod stats;

#[derive(Parser)]
#[command(name = "parley", version, about = "Operator tooling for the parley dialogue engine")]
struct Cli {
    /// Config file. Defaults to ./parley.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive chat against a local engine. `:quit` exits, `:seed N` reseeds generation.
    Chat {
        #[arg(long)]
        user: Option<String>,
    },
    /// Stratified k-fold accuracy of the intent classifiers.
    EvalIntents {
        /// Labeled corpus; defaults to the configured intent corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Repeatable; all methods when omitted.
        #[arg(long = "method")]
        methods: Vec<Method>,
        #[arg(long, short = 'k', default_value_t = 10)]
        folds: usize,
        /// Also print the confusion counts.
        #[arg(long)]
        confusion: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Checks every dialogue graph in a directory.
    Lint {
        /// Defaults to the configured dialogue directory.
        dir: Option<PathBuf>,
    },
    /// Validates knowledge files and optionally writes the normalized tables.
    Ingest {
        #[arg(long)]
        concepts: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        facts: Option<PathBuf>,
        /// Directory for the normalized concepts.tsv, labels.tsv and facts.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-topic rating, time and turns from the session logs.
    Stats {
        /// Defaults to the configured data directory.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> anyhow::Result<Config> {
    let implicit = Path::new("parley.toml");
    let path = path.or_else(|| implicit.is_file().then_some(implicit));
    let mut config = Config::resolve(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

/// Whether the command found nothing to complain about.
fn run(cli: Cli) -> anyhow::Result<bool> {
    let config = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Chat { user } => chat::run(&config, user),
        Command::EvalIntents { corpus, methods, folds, confusion, format } => {
            let methods = if methods.is_empty() { Method::ALL.to_vec() } else { methods };
            eval::run(&config, corpus.as_deref(), &methods, folds, confusion, format)
        }
        Command::Lint { dir } => lint::run(&config, dir.as_deref()),
        Command::Ingest { concepts, labels, facts, out } => {
            let f = &config.files;
            let pick = |given: Option<PathBuf>, default: &PathBuf| given.unwrap_or_else(|| config.fixture(default));
            ingest::run(&pick(concepts, &f.concepts), &pick(labels, &f.labels), &pick(facts, &f.facts), out.as_deref())
        }
        Command::Stats { data_dir, format } => stats::run(data_dir.as_deref().unwrap_or(&config.data_dir), format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            // library errors often repeat their source in their own message
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("parley: {message}");
            ExitCode::from(1)
        }
    }
}
