//! Pulling the ontology out of a chat response.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::parse_lenient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Prose,
    Ontology,
    ExtraDocument,
}

/// Byte range of the raw response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub ontology_text: String,
    pub leading_prose: String,
    /// Prose after the ontology, with any extra documents cut out.
    pub trailing_prose: String,
    pub extra_documents: Vec<String>,
    pub fenced: bool,
    /// In response order; together they cover the response exactly.
    pub segments: Vec<Segment>,
}

impl ExtractionResult {
    pub fn reassemble(&self, response: &str) -> String {
        self.segments.iter().map(|s| &response[s.start..s.end]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no Turtle document found in the response")]
pub struct ExtractionError;

/// A region is usable when it yields triples and its only defects are
/// undeclared prefixes (those are repaired later and charged as syntax errors).
fn usable(text: &str) -> bool {
    let out = parse_lenient(text, None);
    !out.graph.is_empty() && out.only_missing_prefixes()
}

/// (content start, content end) of each ``` fenced block.
fn fenced_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut open: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") || trimmed.starts_with("~~~") {
            match open {
                None => open = Some(offset + line.len()),
                Some(start) => {
                    blocks.push((start, offset));
                    open = None;
                }
            }
        }
        offset += line.len();
    }
    // an unterminated fence runs to the end
    if let Some(start) = open {
        blocks.push((start, text.len()));
    }
    blocks
}

fn looks_like_turtle_start(line: &str) -> bool {
    let l = line.trim_start();
    let lower = l.get(..7).unwrap_or(l).to_ascii_lowercase();
    if lower.starts_with("@prefix") || lower.starts_with("@base") || lower.starts_with("prefix") || lower.starts_with("base") {
        return true;
    }
    if l.starts_with('<') || l.starts_with('[') || l.starts_with("_:") || l.starts_with(':') || l.starts_with('(') {
        return true;
    }
    let name: String = l
        .chars()
        .take_while(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
        .collect();
    !name.is_empty() && l[name.len()..].starts_with(':')
}

/// Longest run of well-formed statements starting at `from`, as a byte range.
fn region_at(text: &str, from: usize) -> Option<(usize, usize)> {
    let out = parse_lenient(&text[from..], None);
    let mut end = None;
    for s in &out.statements {
        if !s.ok {
            break;
        }
        end = Some(s.end);
    }
    let end = from + end?;
    usable(&text[from..end]).then_some((from, end))
}

/// Unfenced documents within `text[lo..hi]`, first to last.
fn scan_unfenced(text: &str, lo: usize, hi: usize) -> Vec<(usize, usize)> {
    let window = &text[..hi];
    let mut found = Vec::new();
    let mut offset = lo;
    while offset < hi {
        let rest = &window[offset..];
        let Some(line) = rest.split_inclusive('\n').next() else { break };
        if looks_like_turtle_start(line) {
            let indent = line.len() - line.trim_start().len();
            if let Some((s, e)) = region_at(window, offset + indent) {
                found.push((s, e));
                offset = e;
                continue;
            }
        }
        offset += line.len();
    }
    found
}

pub fn extract_ontology(response: &str) -> Result<ExtractionResult, ExtractionError> {
    let fenced: Vec<(usize, usize)> = fenced_blocks(response)
        .into_iter()
        .filter(|&(s, e)| usable(&response[s..e]))
        .collect();
    let (docs, is_fenced) = if fenced.is_empty() {
        (scan_unfenced(response, 0, response.len()), false)
    } else {
        (fenced, true)
    };
    let (&(os, oe), extra) = docs.split_first().ok_or(ExtractionError)?;

    let mut segments = Vec::new();
    let mut push = |kind, start, end| {
        if end > start {
            segments.push(Segment { kind, start, end });
        }
    };
    push(SegmentKind::Prose, 0, os);
    push(SegmentKind::Ontology, os, oe);
    let mut cursor = oe;
    let mut trailing = String::new();
    for &(s, e) in extra {
        push(SegmentKind::Prose, cursor, s);
        trailing.push_str(&response[cursor..s]);
        push(SegmentKind::ExtraDocument, s, e);
        cursor = e;
    }
    push(SegmentKind::Prose, cursor, response.len());
    trailing.push_str(&response[cursor..]);

    Ok(ExtractionResult {
        ontology_text: response[os..oe].to_string(),
        leading_prose: response[..os].to_string(),
        trailing_prose: trailing,
        extra_documents: extra.iter().map(|&(s, e)| response[s..e].to_string()).collect(),
        fenced: is_fenced,
        segments,
    })
}
