use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{IntentClassifier, IntentError, LabeledExample, Method};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub method: Method,
    pub folds: usize,
    pub corpus_size: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `(gold, predicted) -> count`
    pub confusion: BTreeMap<(String, String), usize>,
}

/// Fold number for every example. Within each label the examples are
/// shuffled by a seeded generator and dealt round-robin, so every fold gets
/// an (almost) equal share of every label.
pub fn stratified_folds(labels: &[String], k: usize, seed: u64) -> Vec<usize> {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for (n, (_, mut idx)) in by_label.into_iter().enumerate() {
        SplitMix64::derive(seed, n as u64).shuffle(&mut idx);
        for (pos, i) in idx.iter().enumerate() {
            folds[*i] = (pos + offset) % k;
        }
        // rotate so that small classes do not all start in fold 0
        offset += idx.len();
    }
    folds
}

pub fn cross_validate<F>(
    method: Method,
    examples: &[LabeledExample],
    k: usize,
    seed: u64,
    train: F,
) -> Result<EvalReport, IntentError>
where
    F: Fn(&[LabeledExample]) -> Result<Box<dyn IntentClassifier>, IntentError>,
{
    let labels: BTreeSet<&str> = examples.iter().map(|e| e.label.as_str()).collect();
    if labels.len() < 2 {
        return Err(IntentError::TooFewClasses(labels.len()));
    }
    if k < 2 || k > examples.len() {
        return Err(IntentError::Evaluation(format!("{k} folds for {} examples", examples.len())));
    }
    let gold: Vec<String> = examples.iter().map(|e| e.label.clone()).collect();
    let folds = stratified_folds(&gold, k, seed);
    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut correct = 0;
    for fold in 0..k {
        let train_set: Vec<LabeledExample> =
            examples.iter().zip(&folds).filter(|(_, &f)| f != fold).map(|(e, _)| e.clone()).collect();
        let classifier = train(&train_set)?;
        for (ex, _) in examples.iter().zip(&folds).filter(|(_, &f)| f == fold) {
            let predicted = classifier.classify(&ex.tokens, &ex.pos_tags).label;
            if predicted == ex.label {
                correct += 1;
            }
            *confusion.entry((ex.label.clone(), predicted)).or_insert(0) += 1;
        }
    }
    Ok(EvalReport {
        method,
        folds: k,
        corpus_size: examples.len(),
        correct,
        accuracy: correct as f64 / examples.len() as f64,
        confusion,
    })
}
