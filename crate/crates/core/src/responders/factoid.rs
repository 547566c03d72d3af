use serde::Serialize;

use crate::analysis::Annotations;
use crate::knowledge::{FactStore, LabelIndex, DEFAULT_MAX_LABEL_DISTANCE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactAnswer {
    pub entity: String,
    pub topic: String,
    pub text: String,
}

/// Answers from local facts about the first focus phrase that resolves to
/// an entity with facts. A fact on one of the utterance's keyword topics is
/// preferred over the entity's first fact.
pub fn factoid_answer(facts: &FactStore, labels: &LabelIndex, ann: &Annotations) -> Option<FactAnswer> {
    let candidates =
        ann.focus_phrases.iter().map(String::as_str).chain(ann.entities.iter().map(|m| m.entity.label.as_str()));
    for phrase in candidates {
        let entity = match labels.lookup(phrase, DEFAULT_MAX_LABEL_DISTANCE) {
            Some(m) => m.canonical_label,
            None => phrase.to_string(),
        };
        let all = facts.entity_facts(&entity);
        if all.is_empty() {
            continue;
        }
        let topics = ann.keyword_topics();
        let chosen = topics.iter().find_map(|t| all.iter().find(|f| f.topic == *t)).unwrap_or(&all[0]);
        return Some(FactAnswer {
            entity: chosen.entity.clone(),
            topic: chosen.topic.clone(),
            text: chosen.text.clone(),
        });
    }
    None
}
