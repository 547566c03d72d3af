use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context as _;

use parley_core::knowledge::{ConceptIndex, FactStore, LabelIndex};

/// Loads the three knowledge tables with the same validation the engine
/// applies and reports what survived.
pub fn run(concepts: &Path, labels: &Path, facts: &Path, out: Option<&Path>) -> anyhow::Result<bool> {
    let concept_index = ConceptIndex::load(concepts)?;
    let label_index = LabelIndex::load(labels)?;
    let fact_store = FactStore::load(facts)?;

    let entries = concept_index.entries();
    println!("concepts  {} surfaces, {} (surface, concept) pairs", concept_index.surface_count(), entries.len());
    println!(
        "labels    {} aliases kept, {} dropped as too far from their canonical label",
        label_index.entries().len(),
        label_index.dropped()
    );
    let labelled: BTreeSet<String> = label_index.entries().iter().map(|e| e.canonical_label.to_lowercase()).collect();
    let unlabelled: BTreeSet<&str> = fact_store
        .records()
        .iter()
        .filter(|f| !labelled.contains(&f.entity.to_lowercase()))
        .map(|f| f.entity.as_str())
        .collect();
    println!("facts     {} facts", fact_store.len());
    for entity in &unlabelled {
        println!("  note: facts about {entity:?} have no label alias");
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut text = String::from("# surface\tconcept\tpopularity\n");
        for e in &entries {
            writeln!(text, "{}\t{}\t{}", e.surface, e.concept, e.popularity)?;
        }
        write(&dir.join("concepts.tsv"), &text)?;
        let mut text = String::from("# alias\tcanonical_label\texternal_id\n");
        for e in label_index.entries() {
            writeln!(text, "{}\t{}\t{}", e.alias, e.canonical_label, e.external_id)?;
        }
        write(&dir.join("labels.tsv"), &text)?;
        let mut text = String::from("# entity\ttopic\tfact\tsource\n");
        for f in fact_store.records() {
            writeln!(text, "{}\t{}\t{}\t{}", f.entity, f.topic, f.text, f.source.as_deref().unwrap_or(""))?;
        }
        write(&dir.join("facts.tsv"), &text)?;
        println!("wrote {}", dir.display());
    }
    Ok(true)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
