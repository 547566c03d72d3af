use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Means closer than this to the threshold count as equal to it, so that a
/// mean of exactly the threshold survives despite rounding in the sum.
pub const MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrToken {
    pub text: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrHypothesis {
    pub tokens: Vec<AsrToken>,
    #[serde(default)]
    pub rank: u32,
}

impl AsrHypothesis {
    /// A single fully confident hypothesis, used when only text is known.
    pub fn from_text(text: &str) -> Self {
        Self {
            tokens: text.split_whitespace().map(|w| AsrToken { text: w.to_string(), confidence: 1.0 }).collect(),
            rank: 0,
        }
    }

    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn mean_confidence(&self) -> Option<f64> {
        if self.tokens.is_empty() {
            return None;
        }
        Some(self.tokens.iter().map(|t| t.confidence).sum::<f64>() / self.tokens.len() as f64)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.tokens.is_empty() {
            return Err(AnalysisError::MalformedHypothesis(format!("hypothesis {} has no tokens", self.rank)));
        }
        if let Some(t) = self.tokens.iter().find(|t| !(0.0..=1.0).contains(&t.confidence)) {
            return Err(AnalysisError::MalformedHypothesis(format!(
                "confidence {} of token {:?} is outside [0, 1]",
                t.confidence, t.text
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsrGateConfig {
    pub threshold: f64,
}

impl Default for AsrGateConfig {
    fn default() -> Self {
        Self { threshold: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub confident: bool,
    pub surviving: Vec<AsrHypothesis>,
}

/// Drops every hypothesis whose mean token confidence is below the threshold.
pub fn asr_gate(hypotheses: &[AsrHypothesis], cfg: AsrGateConfig) -> Result<GateOutcome, AnalysisError> {
    if hypotheses.is_empty() {
        return Err(AnalysisError::MalformedHypothesis("no hypotheses".into()));
    }
    let mut ranks = std::collections::HashSet::new();
    for h in hypotheses {
        h.validate()?;
        if !ranks.insert(h.rank) {
            return Err(AnalysisError::MalformedHypothesis(format!("duplicate rank {}", h.rank)));
        }
    }
    let surviving: Vec<AsrHypothesis> = hypotheses
        .iter()
        .filter(|h| h.mean_confidence().is_some_and(|m| m >= cfg.threshold - MEAN_TOLERANCE))
        .cloned()
        .collect();
    Ok(GateOutcome { confident: !surviving.is_empty(), surviving })
}
