//! Multinomial logistic regression over binary word and POS n-gram
//! indicators, trained by full-batch gradient descent with balanced class
//! weights and an L2 penalty on the weights (not the biases).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{pos_ngrams, word_ngrams, IntentError, LabeledExample};
use crate::analysis::Tag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { epochs: 500, learning_rate: 0.1, l2: 1e-4 }
    }
}

/// `w_c = N / (K * count_c)` for each class in `classes` order.
pub fn balanced_class_weights(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let k = counts.len() as f64;
    counts.iter().map(|&c| if c == 0 { 0.0 } else { total as f64 / (k * c as f64) }).collect()
}

/// Feature names for one utterance: `w:` word uni/bigrams and `p:` tag uni/bigrams.
pub fn feature_names(tokens: &[String], pos_tags: &[Tag]) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for g in word_ngrams(tokens, (1, 2)) {
        names.insert(format!("w:{g}"));
    }
    for g in pos_ngrams(pos_tags, (1, 2)) {
        names.insert(format!("p:{g}"));
    }
    names
}

/// Weighted cross-entropy objective over sparse rows. Parameters are laid
/// out as `classes × features` weights (row-major) followed by `classes` biases.
#[derive(Debug, Clone)]
pub struct LogRegObjective {
    pub n_features: usize,
    pub n_classes: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<usize>,
    pub class_weights: Vec<f64>,
    pub l2: f64,
}

impl LogRegObjective {
    pub fn n_params(&self) -> usize {
        self.n_classes * (self.n_features + 1)
    }

    fn scores(&self, params: &[f64], row: &[(usize, f64)]) -> Vec<f64> {
        let bias = &params[self.n_classes * self.n_features..];
        (0..self.n_classes)
            .map(|c| {
                let w = &params[c * self.n_features..(c + 1) * self.n_features];
                bias[c] + row.iter().map(|&(f, x)| w[f] * x).sum::<f64>()
            })
            .collect()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.rows.len() as f64;
        let mut total = 0.0;
        for (row, &y) in self.rows.iter().zip(&self.labels) {
            let p = softmax(&self.scores(params, row));
            total += self.class_weights[y] * -p[y].max(f64::MIN_POSITIVE).ln();
        }
        let penalty: f64 = params[..self.n_classes * self.n_features].iter().map(|w| w * w).sum();
        total / n + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let n = self.rows.len() as f64;
        let nf = self.n_features;
        let mut grad = vec![0.0; self.n_params()];
        for (row, &y) in self.rows.iter().zip(&self.labels) {
            let p = softmax(&self.scores(params, row));
            let sw = self.class_weights[y] / n;
            for c in 0..self.n_classes {
                let delta = sw * (p[c] - if c == y { 1.0 } else { 0.0 });
                for &(f, x) in row {
                    grad[c * nf + f] += delta * x;
                }
                grad[self.n_classes * nf + c] += delta;
            }
        }
        for (g, w) in grad[..self.n_classes * nf].iter_mut().zip(&params[..self.n_classes * nf]) {
            *g += self.l2 * w;
        }
        grad
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone)]
pub struct LogRegModel {
    pub features: BTreeMap<String, usize>,
    pub classes: Vec<String>,
    /// `classes × features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub class_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegPrediction {
    pub label: String,
    pub probabilities: Vec<(String, f64)>,
}

impl LogRegModel {
    pub fn train(examples: &[LabeledExample], config: LogRegConfig) -> Result<Self, IntentError> {
        let classes: Vec<String> =
            examples.iter().map(|e| e.label.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        if classes.len() < 2 {
            return Err(IntentError::TooFewClasses(classes.len()));
        }
        let class_index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let names: Vec<BTreeSet<String>> = examples.iter().map(|e| feature_names(&e.tokens, &e.pos_tags)).collect();
        let features: BTreeMap<String, usize> = names
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, f)| (f, i))
            .collect();
        let rows: Vec<Vec<(usize, f64)>> =
            names.iter().map(|set| set.iter().map(|f| (features[f], 1.0)).collect()).collect();
        let labels: Vec<usize> = examples.iter().map(|e| class_index[e.label.as_str()]).collect();
        let mut counts = vec![0; classes.len()];
        labels.iter().for_each(|&y| counts[y] += 1);
        let class_weights = balanced_class_weights(&counts);

        let objective = LogRegObjective {
            n_features: features.len(),
            n_classes: classes.len(),
            rows,
            labels,
            class_weights: class_weights.clone(),
            l2: config.l2,
        };
        let mut params = vec![0.0; objective.n_params()];
        for _ in 0..config.epochs {
            let grad = objective.gradient(&params);
            params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= config.learning_rate * g);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(IntentError::Diverged);
        }
        let split = classes.len() * features.len();
        let bias = params.split_off(split);
        Ok(Self { features, classes, weights: params, bias, class_weights })
    }

    /// Features unseen in training are ignored.
    pub fn predict(&self, tokens: &[String], pos_tags: &[Tag]) -> LogRegPrediction {
        let active: Vec<usize> =
            feature_names(tokens, pos_tags).iter().filter_map(|f| self.features.get(f).copied()).collect();
        let nf = self.features.len();
        let scores: Vec<f64> = (0..self.classes.len())
            .map(|c| self.bias[c] + active.iter().map(|&f| self.weights[c * nf + f]).sum::<f64>())
            .collect();
        let probs = softmax(&scores);
        let best = probs.iter().enumerate().fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
        LogRegPrediction {
            label: self.classes[best].clone(),
            probabilities: self.classes.iter().cloned().zip(probs).collect(),
        }
    }
}
