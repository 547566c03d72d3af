use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{data_lines, read_file, ConceptScore, KnowledgeError};

/// One `surface<TAB>concept<TAB>popularity` row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptEntry {
    pub surface: String,
    pub concept: String,
    pub popularity: u64,
}

/// Exact-match index from lowercase surface form to its concepts,
/// sorted by popularity descending, then concept ascending.
#[derive(Debug, Clone, Default)]
pub struct ConceptIndex {
    by_surface: HashMap<String, Vec<ConceptScore>>,
    max_words: usize,
}

impl ConceptIndex {
    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        Self::parse(&read_file(path)?, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, KnowledgeError> {
        let mut rows = Vec::new();
        for (line, raw) in data_lines(text) {
            rows.push(parse_row(raw).map_err(|reason| KnowledgeError::Malformed {
                path: origin.to_path_buf(),
                line,
                reason,
            })?);
        }
        Ok(Self::from_entries(rows))
    }

    /// Duplicate `(surface, concept)` rows have their popularities summed.
    pub fn from_entries(entries: impl IntoIterator<Item = ConceptEntry>) -> Self {
        let mut folded: HashMap<String, BTreeMap<String, u64>> = HashMap::new();
        for e in entries {
            let slot = folded
                .entry(e.surface.trim().to_lowercase())
                .or_default()
                .entry(e.concept.trim().to_string())
                .or_insert(0);
            *slot = slot.saturating_add(e.popularity);
        }
        let mut max_words = 0;
        let by_surface = folded
            .into_iter()
            .map(|(surface, concepts)| {
                max_words = max_words.max(surface.split_whitespace().count());
                let mut list: Vec<ConceptScore> =
                    concepts.into_iter().map(|(concept, popularity)| ConceptScore { concept, popularity }).collect();
                list.sort_by(|a, b| b.popularity.cmp(&a.popularity).then_with(|| a.concept.cmp(&b.concept)));
                (surface, list)
            })
            .collect();
        Self { by_surface, max_words }
    }

    pub fn lookup(&self, surface: &str) -> &[ConceptScore] {
        self.by_surface.get(&surface.trim().to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn surface_count(&self) -> usize {
        self.by_surface.len()
    }

    /// Longest surface form in words; bounds span enumeration during recognition.
    pub fn max_surface_words(&self) -> usize {
        self.max_words
    }

    /// Normalized rows, sorted by surface then the lookup order.
    pub fn entries(&self) -> Vec<ConceptEntry> {
        let mut surfaces: Vec<&String> = self.by_surface.keys().collect();
        surfaces.sort();
        surfaces
            .into_iter()
            .flat_map(|s| {
                self.by_surface[s].iter().map(move |c| ConceptEntry {
                    surface: s.clone(),
                    concept: c.concept.clone(),
                    popularity: c.popularity,
                })
            })
            .collect()
    }
}

fn parse_row(raw: &str) -> Result<ConceptEntry, String> {
    let cols: Vec<&str> = raw.split('\t').collect();
    if cols.len() != 3 {
        return Err(format!("expected 3 tab-separated columns, found {}", cols.len()));
    }
    let surface = cols[0].trim();
    let concept = cols[1].trim();
    if surface.is_empty() || concept.is_empty() {
        return Err("empty surface or concept".into());
    }
    let popularity: i64 =
        cols[2].trim().parse().map_err(|_| format!("popularity {:?} is not an integer", cols[2].trim()))?;
    if popularity < 0 {
        return Err(format!("negative popularity {popularity}"));
    }
    Ok(ConceptEntry { surface: surface.to_string(), concept: concept.to_string(), popularity: popularity as u64 })
}
