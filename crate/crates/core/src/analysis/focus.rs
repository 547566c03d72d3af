use std::collections::HashSet;

use super::pos::Tag;

/// Token span `[start, end)` of a recognized entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Maximal runs of `NNP` tokens plus entity spans, in order of appearance
/// and deduplicated case-insensitively.
pub fn extract_focus(truecased: &[String], pos_tags: &[Tag], entity_spans: &[Span]) -> Vec<String> {
    let mut spans: Vec<Span> = Vec::new();
    let mut run_start = None;
    for (i, tag) in pos_tags.iter().chain(std::iter::once(&Tag::Other)).enumerate() {
        match (tag, run_start) {
            (Tag::Nnp, None) => run_start = Some(i),
            (Tag::Nnp, Some(_)) => {}
            (_, Some(s)) => {
                spans.push(Span { start: s, end: i });
                run_start = None;
            }
            (_, None) => {}
        }
    }
    spans.extend(entity_spans.iter().copied().filter(|s| s.start < s.end && s.end <= truecased.len()));
    // earlier first; at the same start the longer span first
    spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in spans {
        let phrase = truecased[s.start..s.end].join(" ");
        if seen.insert(phrase.to_lowercase()) {
            out.push(phrase);
        }
    }
    out
}
