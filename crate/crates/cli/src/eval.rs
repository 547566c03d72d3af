use std::collections::BTreeSet;
use std::path::Path;

use parley_core::analysis::{CasingLexicon, ClosedClassLexicon, RuleAnnotator};
use parley_core::config::Config;
use parley_core::intent::{
    cross_validate, load_corpus, train_classifier, EmbeddingTable, EvalReport, Method, TrainingSetup,
};

use crate::Format;

pub fn run(
    config: &Config,
    corpus: Option<&Path>,
    methods: &[Method],
    folds: usize,
    confusion: bool,
    format: Format,
) -> anyhow::Result<bool> {
    let files = &config.files;
    let annotator = RuleAnnotator {
        casing: CasingLexicon::load(&config.fixture(&files.casing))?,
        closed: ClosedClassLexicon::load(&config.fixture(&files.closed_class))?,
    };
    let path = corpus.map_or_else(|| config.fixture(&files.intents), Path::to_path_buf);
    let examples = load_corpus(&path, &annotator)?;
    let embeddings = match methods.contains(&Method::Embedding) {
        true => Some(std::sync::Arc::new(EmbeddingTable::load(&config.fixture(&files.embeddings))?)),
        false => None,
    };
    let setup =
        TrainingSetup { embeddings, logreg: config.logreg, fallback: "none".into(), ..TrainingSetup::default() };

    let mut reports = Vec::new();
    for &method in methods {
        reports.push(cross_validate(method, &examples, folds, config.seed, |train| {
            train_classifier(method, train, &setup)
        })?);
    }
    let labels: BTreeSet<&str> = examples.iter().map(|e| e.label.as_str()).collect();
    match format {
        Format::Table => {
            println!("{:<20} {:>8}", "Method", "Accuracy");
            for r in &reports {
                println!("{:<20} {:>8.3}", r.method.display_name(), r.accuracy);
            }
            println!(
                "\n{} examples, {} labels, {folds} folds, seed {} ({})",
                examples.len(),
                labels.len(),
                config.seed,
                path.display()
            );
        }
        Format::Tsv => {
            println!("method\taccuracy\tcorrect\ttotal");
            for r in &reports {
                println!("{}\t{}\t{}\t{}", r.method.as_str(), r.accuracy, r.correct, r.corpus_size);
            }
        }
    }
    if confusion {
        for r in &reports {
            print_confusion(r, format);
        }
    }
    Ok(true)
}

fn print_confusion(r: &EvalReport, format: Format) {
    match format {
        Format::Table => {
            println!("\n{} confusion (gold -> predicted):", r.method.display_name());
            for ((gold, predicted), n) in &r.confusion {
                println!("  {gold:<24} {predicted:<24} {n}");
            }
        }
        Format::Tsv => {
            for ((gold, predicted), n) in &r.confusion {
                println!("{}\t{gold}\t{predicted}\t{n}", r.method.as_str());
            }
        }
    }
}
