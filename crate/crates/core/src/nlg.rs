//! Template response realization.
//!
//! A template is an ordered list of segments; each segment is a set of
//! alternative fragments. Rendering picks one alternative per segment with
//! a seeded [`SplitMix64`] stream, fills `{key}` placeholders from the
//! context (turn, then session, then long-term scope) and joins the parts
//! with single spaces.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use crate::context::Context;
use crate::rng::SplitMix64;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum NlgError {
    #[error("template {template}: segment {segment} has no alternatives")]
    EmptySegment { template: String, segment: usize },
    #[error("template {0} has no segments")]
    EmptyTemplate(String),
    #[error("template {template}: malformed placeholder in {fragment:?}")]
    BadPlaceholder { template: String, fragment: String },
    #[error("duplicate template id {0}")]
    Duplicate(String),
    #[error("unknown template {0}")]
    Unknown(String),
    #[error("unresolved placeholder {key} in template {template}")]
    Unresolved { template: String, key: String },
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseTemplate {
    pub id: String,
    pub segments: Vec<Vec<String>>,
}

impl ResponseTemplate {
    pub fn new(id: &str, segments: Vec<Vec<String>>) -> Result<Self, NlgError> {
        if segments.is_empty() {
            return Err(NlgError::EmptyTemplate(id.to_string()));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                return Err(NlgError::EmptySegment { template: id.to_string(), segment: i });
            }
            for fragment in seg {
                placeholders(fragment)
                    .map_err(|_| NlgError::BadPlaceholder { template: id.to_string(), fragment: fragment.clone() })?;
            }
        }
        Ok(Self { id: id.to_string(), segments })
    }

    /// Every placeholder name used by any alternative.
    pub fn placeholder_names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            self.segments.iter().flatten().flat_map(|f| placeholders(f).unwrap_or_default()).collect();
        names.sort();
        names.dedup();
        names
    }
}

fn is_key(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Placeholder names in a fragment; `Err` on an unbalanced brace or an invalid name.
fn placeholders(fragment: &str) -> Result<Vec<String>, ()> {
    let mut names = Vec::new();
    let mut rest = fragment;
    while let Some(open) = rest.find(['{', '}']) {
        if rest[open..].starts_with('}') {
            return Err(());
        }
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or(())?;
        let name = &after[..close];
        if !is_key(name) {
            return Err(());
        }
        names.push(name.to_string());
        rest = &after[close + 1..];
    }
    Ok(names)
}

/// Picks one alternative per segment and fills placeholders.
pub fn render(template: &ResponseTemplate, ctx: &Context, seed: u64) -> Result<String, NlgError> {
    let mut rng = SplitMix64::new(seed);
    let mut parts = Vec::with_capacity(template.segments.len());
    for seg in &template.segments {
        let choice = &seg[rng.below(seg.len())];
        parts.push(fill(choice, ctx, &template.id)?);
    }
    Ok(parts.join(" ").split_whitespace().collect::<Vec<_>>().join(" "))
}

fn fill(fragment: &str, ctx: &Context, template: &str) -> Result<String, NlgError> {
    let mut out = String::with_capacity(fragment.len());
    let mut rest = fragment;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').expect("validated at load");
        let key = &after[..close];
        let value = ctx
            .lookup(key)
            .ok_or_else(|| NlgError::Unresolved { template: template.to_string(), key: key.to_string() })?;
        out.push_str(&value.render());
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: BTreeMap<String, ResponseTemplate>,
}

impl TemplateSet {
    pub fn load(path: &Path) -> Result<Self, NlgError> {
        let text = std::fs::read_to_string(path).map_err(|e| NlgError::Parse(format!("{}: {e}", path.display())))?;
        let doc: TemplateDocument =
            serde_yaml::from_str(&text).map_err(|e| NlgError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_pairs(doc.templates.0)
    }

    pub fn from_pairs(pairs: Vec<(String, Vec<SegmentDoc>)>) -> Result<Self, NlgError> {
        let mut set = Self::default();
        for (id, segs) in pairs {
            set.insert(ResponseTemplate::new(&id, segs.into_iter().map(SegmentDoc::into_alternatives).collect())?)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, template: ResponseTemplate) -> Result<(), NlgError> {
        if self.templates.contains_key(&template.id) {
            return Err(NlgError::Duplicate(template.id));
        }
        self.templates.insert(template.id.clone(), template);
        Ok(())
    }

    pub fn merge(&mut self, other: TemplateSet) -> Result<(), NlgError> {
        for t in other.templates.into_values() {
            self.insert(t)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ResponseTemplate> {
        self.templates.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResponseTemplate> {
        self.templates.values()
    }

    pub fn render(&self, id: &str, ctx: &Context, seed: u64) -> Result<String, NlgError> {
        render(self.get(id).ok_or_else(|| NlgError::Unknown(id.to_string()))?, ctx, seed)
    }
}

/// A segment written either as a list of alternatives or as one string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SegmentDoc {
    One(String),
    Many(Vec<String>),
}

impl SegmentDoc {
    fn into_alternatives(self) -> Vec<String> {
        match self {
            SegmentDoc::One(s) => vec![s],
            SegmentDoc::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDocument {
    templates: OrderedPairs<Vec<SegmentDoc>>,
}

/// A YAML mapping read in document order, keeping duplicate keys so that
/// callers can reject them with a precise error.
#[derive(Debug, Clone)]
pub struct OrderedPairs<T>(pub Vec<(String, T)>);

impl<T> Default for OrderedPairs<T> {
    fn default() -> Self {
        Self(Vec::new())
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for OrderedPairs<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairsVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for PairsVisitor<T> {
            type Value = OrderedPairs<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a mapping")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, T>()? {
                    pairs.push((k, v));
                }
                Ok(OrderedPairs(pairs))
            }
        }

        deserializer.deserialize_map(PairsVisitor(std::marker::PhantomData))
    }
}
