use std::path::Path;

use super::{data_lines, read_file, KnowledgeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactRecord {
    pub entity: String,
    pub topic: String,
    pub text: String,
    pub source: Option<String>,
}

/// Facts keyed by canonical entity label (case-insensitive) and topic.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    facts: Vec<FactRecord>,
}

impl FactStore {
    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        Self::parse(&read_file(path)?, path)
    }

    /// Rows are `entity<TAB>topic<TAB>fact[<TAB>source]`.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, KnowledgeError> {
        let mut facts = Vec::new();
        for (line, raw) in data_lines(text) {
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let malformed = |reason: &str| KnowledgeError::Malformed {
                path: origin.to_path_buf(),
                line,
                reason: reason.to_string(),
            };
            if !(3..=4).contains(&cols.len()) {
                return Err(malformed("expected entity<TAB>topic<TAB>fact[<TAB>source]"));
            }
            if cols[0].is_empty() || cols[2].is_empty() {
                return Err(malformed("empty entity or fact text"));
            }
            facts.push(FactRecord {
                entity: cols[0].to_string(),
                topic: cols[1].to_string(),
                text: cols[2].to_string(),
                source: cols.get(3).filter(|s| !s.is_empty()).map(|s| s.to_string()),
            });
        }
        Ok(Self { facts })
    }

    pub fn from_records(facts: Vec<FactRecord>) -> Self {
        Self { facts }
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn records(&self) -> &[FactRecord] {
        &self.facts
    }

    /// All facts about `entity`, in file order.
    pub fn entity_facts(&self, entity: &str) -> Vec<&FactRecord> {
        self.facts.iter().filter(|f| f.entity.eq_ignore_ascii_case(entity)).collect()
    }

    /// Facts for `(entity, topic)`; when the topic has none, every fact
    /// about the entity.
    pub fn get_facts(&self, entity: &str, topic: &str) -> Vec<&FactRecord> {
        let all = self.entity_facts(entity);
        let on_topic: Vec<&FactRecord> = all.iter().copied().filter(|f| f.topic == topic).collect();
        if on_topic.is_empty() {
            all
        } else {
            on_topic
        }
    }
}
