use std::fmt;

use serde::{Deserialize, Serialize};

use super::vocab::{RDF_TYPE, XSD_STRING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Iri,
    BlankNode,
    Literal,
}

/// An RDF term. Literals carry either a datatype or a language tag, never both;
/// simple literals are stored with datatype xsd:string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub kind: TermKind,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Term {
        Term {
            kind: TermKind::Iri,
            value: value.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn blank(label: impl Into<String>) -> Term {
        Term {
            kind: TermKind::BlankNode,
            value: label.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn string(value: impl Into<String>) -> Term {
        Term::typed(value, XSD_STRING)
    }

    pub fn typed(value: impl Into<String>, datatype: impl Into<String>) -> Term {
        Term {
            kind: TermKind::Literal,
            value: value.into(),
            datatype: Some(datatype.into()),
            language: None,
        }
    }

    pub fn lang(value: impl Into<String>, tag: impl Into<String>) -> Term {
        Term {
            kind: TermKind::Literal,
            value: value.into(),
            datatype: None,
            language: Some(tag.into().to_ascii_lowercase()),
        }
    }

    pub fn is_iri(&self) -> bool {
        self.kind == TermKind::Iri
    }

    pub fn is_blank(&self) -> bool {
        self.kind == TermKind::BlankNode
    }

    pub fn is_literal(&self) -> bool {
        self.kind == TermKind::Literal
    }

    pub fn as_iri(&self) -> Option<&str> {
        if self.is_iri() {
            Some(&self.value)
        } else {
            None
        }
    }

    /// Part of an IRI after the last '#' or '/'.
    pub fn local_name(&self) -> &str {
        local_name(&self.value)
    }
}

pub fn local_name(iri: &str) -> &str {
    match iri.rfind(['#', '/']) {
        Some(i) if i + 1 < iri.len() => &iri[i + 1..],
        _ => iri,
    }
}

impl fmt::Display for Term {
    /// N-Triples form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TermKind::Iri => write!(f, "<{}>", self.value),
            TermKind::BlankNode => write!(f, "_:{}", self.value),
            TermKind::Literal => {
                write!(f, "\"{}\"", escape_string(&self.value))?;
                if let Some(lang) = &self.language {
                    write!(f, "@{lang}")
                } else {
                    match self.datatype.as_deref() {
                        Some(XSD_STRING) | None => Ok(()),
                        Some(dt) => write!(f, "^^<{dt}>"),
                    }
                }
            }
        }
    }
}

pub(crate) fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Triple {
        debug_assert!(predicate.is_iri());
        debug_assert!(!subject.is_literal());
        Triple {
            subject,
            predicate,
            object,
        }
    }

    pub fn is_type(&self) -> bool {
        self.predicate.value == RDF_TYPE
    }

    pub fn has_blank(&self) -> bool {
        self.subject.is_blank() || self.object.is_blank()
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
