//! Request and response shapes of one conversational turn.

use serde::{Deserialize, Serialize};

use crate::analysis::{AsrHypothesis, AsrToken};
use crate::dialogue::Module;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireHypothesis {
    pub tokens: Vec<AsrToken>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRequest {
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr_hypotheses: Option<Vec<WireHypothesis>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RequestError {
    #[error("request has neither text nor hypotheses")]
    Empty,
    #[error("hypothesis {index} has no tokens")]
    EmptyHypothesis { index: usize },
    #[error("hypothesis {index}, token {token:?}: confidence {confidence} is outside [0, 1]")]
    Confidence { index: usize, token: String, confidence: f64 },
}

impl TurnRequest {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), ..Self::default() }
    }

    /// Hypotheses ranked in list order; plain text becomes one hypothesis
    /// with full confidence on every token.
    pub fn hypotheses(&self) -> Result<Vec<AsrHypothesis>, RequestError> {
        match &self.asr_hypotheses {
            Some(hyps) if !hyps.is_empty() => hyps
                .iter()
                .enumerate()
                .map(|(index, h)| {
                    if h.tokens.is_empty() {
                        return Err(RequestError::EmptyHypothesis { index });
                    }
                    if let Some(t) = h.tokens.iter().find(|t| !(0.0..=1.0).contains(&t.confidence)) {
                        return Err(RequestError::Confidence {
                            index,
                            token: t.text.clone(),
                            confidence: t.confidence,
                        });
                    }
                    Ok(AsrHypothesis { tokens: h.tokens.clone(), rank: index as u32 })
                })
                .collect(),
            _ if self.text.trim().is_empty() => Err(RequestError::Empty),
            _ => Ok(vec![AsrHypothesis::from_text(self.text.trim())]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTrace {
    /// Module chosen by the top-level router.
    pub module: Module,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    pub confident: bool,
    pub profane: bool,
    /// Producer of the response text, which differs from `module` when a
    /// module falls back (e.g. `chitchat` after a dialogue finds no transition).
    pub responder: String,
    /// Router gate outcomes in evaluation order.
    #[serde(default)]
    pub steps: Vec<String>,
    /// Dialogue states whose actions ran this turn.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
}

impl TurnTrace {
    /// `module[/topic][@state]`
    pub fn summary(&self) -> String {
        let mut s = self.module.to_string();
        if let Some(t) = &self.topic {
            s.push('/');
            s.push_str(t);
        }
        if let Some(st) = &self.state {
            s.push('@');
            s.push_str(st);
        }
        if self.responder != self.module.as_str() {
            s.push_str(&format!(" via {}", self.responder));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub session_id: String,
    pub response: String,
    pub trace: TurnTrace,
    pub turn_counter: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}
