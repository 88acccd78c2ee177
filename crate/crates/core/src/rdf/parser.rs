//! Error-recovering Turtle parser.
//!
//! After an issue the parser skips to the next `.` and carries on, so a single
//! pass reports every independent problem it can localise. An undeclared prefix
//! does not abort its statement: it is reported once per label and parsing
//! continues with a placeholder IRI.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::lexer::{Lexer, Tok, Token};
use super::term::{Term, Triple};
use super::vocab::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCategory {
    MissingPrefix,
    MalformedStatement,
    BadLiteral,
    BadIri,
    Other,
}

impl fmt::Display for IssueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IssueCategory::MissingPrefix => "MISSING_PREFIX",
            IssueCategory::MalformedStatement => "MALFORMED_STATEMENT",
            IssueCategory::BadLiteral => "BAD_LITERAL",
            IssueCategory::BadIri => "BAD_IRI",
            IssueCategory::Other => "OTHER",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxIssue {
    pub category: IssueCategory,
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub offending_token: String,
}

impl SyntaxIssue {
    /// The undeclared label for MISSING_PREFIX issues.
    pub fn prefix_label(&self) -> Option<&str> {
        if self.category == IssueCategory::MissingPrefix {
            self.offending_token.strip_suffix(':')
        } else {
            None
        }
    }
}

impl fmt::Display for SyntaxIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {} (near {:?})",
            self.line, self.column, self.category, self.message, self.offending_token
        )
    }
}

/// Byte span of one top-level statement and whether it parsed without issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatementSpan {
    pub start: usize,
    pub end: usize,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    /// Triples from every statement that parsed (placeholders stand in for undeclared prefixes).
    pub graph: Graph,
    pub issues: Vec<SyntaxIssue>,
    pub statements: Vec<StatementSpan>,
}

impl ParseOutcome {
    pub fn missing_prefixes(&self) -> Vec<String> {
        self.issues
            .iter()
            .filter_map(|i| i.prefix_label().map(str::to_string))
            .collect()
    }

    /// True when every issue is an undeclared prefix.
    pub fn only_missing_prefixes(&self) -> bool {
        self.issues
            .iter()
            .all(|i| i.category == IssueCategory::MissingPrefix)
    }
}

pub fn parse_turtle(document: &str, base: Option<&str>) -> Result<Graph, Vec<SyntaxIssue>> {
    let out = parse_lenient(document, base);
    if out.issues.is_empty() {
        Ok(out.graph)
    } else {
        Err(out.issues)
    }
}

pub fn parse_lenient(document: &str, base: Option<&str>) -> ParseOutcome {
    let lexer = Lexer::new(document);
    let (tokens, lex_issues, line_starts) = lexer.tokenize();
    let mut p = Parser {
        src: document,
        tokens,
        pos: 0,
        line_starts,
        prefixes: IndexMap::new(),
        base: base.map(str::to_string),
        triples: Vec::new(),
        pending: Vec::new(),
        issues: lex_issues,
        missing_seen: BTreeSet::new(),
        bnode_labels: HashMap::new(),
        bnode_counter: 0,
        statements: Vec::new(),
    };
    p.document();
    let mut graph = Graph::new();
    for (label, ns) in &p.prefixes {
        graph.set_prefix(label.clone(), ns.clone());
    }
    graph.set_base(p.base.clone());
    graph.extend(p.triples);
    let mut issues = p.issues;
    issues.sort_by_key(|i| (i.line, i.column));
    ParseOutcome {
        graph,
        issues,
        statements: p.statements,
    }
}

enum Fail {
    Issue(IssueCategory, String),
    /// The lexer already reported this token.
    Reported,
}

type PResult<T> = Result<T, Fail>;

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    line_starts: Vec<usize>,
    prefixes: IndexMap<String, String>,
    base: Option<String>,
    triples: Vec<Triple>,
    pending: Vec<Triple>,
    issues: Vec<SyntaxIssue>,
    missing_seen: BTreeSet<String>,
    bnode_labels: HashMap<String, String>,
    bnode_counter: usize,
    statements: Vec<StatementSpan>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let start = self.line_starts[line];
        (line + 1, self.src[start..offset].chars().count() + 1)
    }

    fn issue_at(&mut self, tok_index: usize, category: IssueCategory, message: String) {
        let (offset, text) = match self.tokens.get(tok_index) {
            Some(t) => (t.start, t.text.clone()),
            None => (self.src.len(), String::from("<end of input>")),
        };
        let (line, column) = self.line_col(offset);
        self.issues.push(SyntaxIssue {
            category,
            line,
            column,
            message,
            offending_token: text,
        });
    }

    fn document(&mut self) {
        while self.pos < self.tokens.len() {
            let start_idx = self.pos;
            let start = self.tokens[start_idx].start;
            self.pending.clear();
            match self.statement() {
                Ok(()) => {
                    let end = self.tokens[self.pos - 1].end;
                    self.triples.append(&mut self.pending);
                    self.statements.push(StatementSpan { start, end, ok: true });
                }
                Err(fail) => {
                    if let Fail::Issue(cat, msg) = fail {
                        let at = self.pos.min(self.tokens.len());
                        self.issue_at(at, cat, msg);
                    }
                    self.recover();
                    let end = self
                        .tokens
                        .get(self.pos.saturating_sub(1))
                        .map(|t| t.end)
                        .unwrap_or(self.src.len())
                        .max(start);
                    self.statements.push(StatementSpan { start, end, ok: false });
                }
            }
            if self.pos == start_idx {
                // never stall
                self.pos += 1;
            }
        }
    }

    /// Skip to just past the next statement terminator.
    fn recover(&mut self) {
        while let Some(t) = self.next() {
            if t.tok == Tok::Dot {
                return;
            }
        }
    }

    fn expect_dot(&mut self) -> PResult<()> {
        match self.peek() {
            Some(Tok::Dot) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Invalid) => Err(Fail::Reported),
            Some(_) => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "expected '.' to end the statement".into(),
            )),
            None => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "statement not terminated by '.'".into(),
            )),
        }
    }

    fn statement(&mut self) -> PResult<()> {
        match self.peek() {
            Some(Tok::AtPrefix) => {
                self.pos += 1;
                self.prefix_decl()?;
                self.expect_dot()
            }
            Some(Tok::SparqlPrefix) => {
                self.pos += 1;
                self.prefix_decl()
            }
            Some(Tok::AtBase) => {
                self.pos += 1;
                self.base_decl()?;
                self.expect_dot()
            }
            Some(Tok::SparqlBase) => {
                self.pos += 1;
                self.base_decl()
            }
            _ => {
                self.triples_stmt()?;
                self.expect_dot()
            }
        }
    }

    fn prefix_decl(&mut self) -> PResult<()> {
        let label = match self.peek() {
            Some(Tok::PName { prefix, local }) if local.is_empty() => prefix.clone(),
            Some(Tok::Invalid) => return Err(Fail::Reported),
            _ => {
                return Err(Fail::Issue(
                    IssueCategory::MalformedStatement,
                    "expected a prefix label like 'ex:'".into(),
                ))
            }
        };
        self.pos += 1;
        let ns = match self.peek() {
            Some(Tok::Iri(v)) => v.clone(),
            Some(Tok::Invalid) => return Err(Fail::Reported),
            _ => {
                return Err(Fail::Issue(
                    IssueCategory::MalformedStatement,
                    "expected a namespace IRI".into(),
                ))
            }
        };
        let ns = self.resolve(&ns)?;
        self.pos += 1;
        self.prefixes.insert(label, ns);
        Ok(())
    }

    fn base_decl(&mut self) -> PResult<()> {
        let iri = match self.peek() {
            Some(Tok::Iri(v)) => v.clone(),
            Some(Tok::Invalid) => return Err(Fail::Reported),
            _ => {
                return Err(Fail::Issue(
                    IssueCategory::MalformedStatement,
                    "expected a base IRI".into(),
                ))
            }
        };
        let iri = self.resolve(&iri)?;
        self.pos += 1;
        self.base = Some(iri);
        Ok(())
    }

    fn triples_stmt(&mut self) -> PResult<()> {
        match self.peek() {
            Some(Tok::LBracket) => {
                self.pos += 1;
                let node = self.blank_property_list()?;
                if !matches!(self.peek(), Some(Tok::Dot)) {
                    self.predicate_object_list(&node)?;
                }
                Ok(())
            }
            _ => {
                let subject = self.subject()?;
                self.predicate_object_list(&subject)
            }
        }
    }

    fn subject(&mut self) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::Iri(v)) => {
                self.pos += 1;
                Ok(Term::iri(self.resolve(&v)?))
            }
            Some(Tok::PName { prefix, local }) => {
                self.pos += 1;
                Ok(Term::iri(self.expand(&prefix, &local)))
            }
            Some(Tok::Blank(label)) => {
                self.pos += 1;
                Ok(self.labelled_blank(&label))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                self.collection()
            }
            Some(Tok::Invalid) => Err(Fail::Reported),
            Some(_) => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "expected a subject".into(),
            )),
            None => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "unexpected end of input".into(),
            )),
        }
    }

    fn verb(&mut self) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::A) => {
                self.pos += 1;
                Ok(Term::iri(RDF_TYPE))
            }
            Some(Tok::Iri(v)) => {
                self.pos += 1;
                Ok(Term::iri(self.resolve(&v)?))
            }
            Some(Tok::PName { prefix, local }) => {
                self.pos += 1;
                Ok(Term::iri(self.expand(&prefix, &local)))
            }
            Some(Tok::Invalid) => Err(Fail::Reported),
            Some(_) => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "expected a predicate".into(),
            )),
            None => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "unexpected end of input".into(),
            )),
        }
    }

    fn predicate_object_list(&mut self, subject: &Term) -> PResult<()> {
        loop {
            let predicate = self.verb()?;
            self.object_list(subject, &predicate)?;
            if !matches!(self.peek(), Some(Tok::Semi)) {
                return Ok(());
            }
            while matches!(self.peek(), Some(Tok::Semi)) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(Tok::Dot) | Some(Tok::RBracket) | None) {
                return Ok(());
            }
        }
    }

    fn object_list(&mut self, subject: &Term, predicate: &Term) -> PResult<()> {
        loop {
            let object = self.object()?;
            self.pending
                .push(Triple::new(subject.clone(), predicate.clone(), object));
            if matches!(self.peek(), Some(Tok::Comma)) {
                self.pos += 1;
            } else {
                return Ok(());
            }
        }
    }

    fn object(&mut self) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::Iri(v)) => {
                self.pos += 1;
                Ok(Term::iri(self.resolve(&v)?))
            }
            Some(Tok::PName { prefix, local }) => {
                self.pos += 1;
                Ok(Term::iri(self.expand(&prefix, &local)))
            }
            Some(Tok::Blank(label)) => {
                self.pos += 1;
                Ok(self.labelled_blank(&label))
            }
            Some(Tok::LBracket) => {
                self.pos += 1;
                self.blank_property_list()
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                self.collection()
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                self.literal_suffix(s)
            }
            Some(Tok::Integer(v)) => {
                self.pos += 1;
                Ok(Term::typed(v, XSD_INTEGER))
            }
            Some(Tok::Decimal(v)) => {
                self.pos += 1;
                Ok(Term::typed(v, XSD_DECIMAL))
            }
            Some(Tok::Double(v)) => {
                self.pos += 1;
                Ok(Term::typed(v, XSD_DOUBLE))
            }
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Term::typed("true", XSD_BOOLEAN))
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Term::typed("false", XSD_BOOLEAN))
            }
            Some(Tok::Invalid) => Err(Fail::Reported),
            Some(_) => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "expected an object".into(),
            )),
            None => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "unexpected end of input".into(),
            )),
        }
    }

    fn literal_suffix(&mut self, value: String) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::LangTag(tag)) => {
                self.pos += 1;
                Ok(Term::lang(value, tag))
            }
            Some(Tok::Carets) => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::Iri(v)) => {
                        self.pos += 1;
                        Ok(Term::typed(value, self.resolve(&v)?))
                    }
                    Some(Tok::PName { prefix, local }) => {
                        self.pos += 1;
                        Ok(Term::typed(value, self.expand(&prefix, &local)))
                    }
                    Some(Tok::Invalid) => Err(Fail::Reported),
                    _ => Err(Fail::Issue(
                        IssueCategory::BadLiteral,
                        "expected a datatype IRI after '^^'".into(),
                    )),
                }
            }
            _ => Ok(Term::string(value)),
        }
    }

    fn blank_property_list(&mut self) -> PResult<Term> {
        let node = self.fresh_blank();
        if matches!(self.peek(), Some(Tok::RBracket)) {
            self.pos += 1;
            return Ok(node);
        }
        self.predicate_object_list(&node)?;
        match self.peek() {
            Some(Tok::RBracket) => {
                self.pos += 1;
                Ok(node)
            }
            Some(Tok::Invalid) => Err(Fail::Reported),
            _ => Err(Fail::Issue(
                IssueCategory::MalformedStatement,
                "expected ']'".into(),
            )),
        }
    }

    fn collection(&mut self) -> PResult<Term> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RParen) => {
                    self.pos += 1;
                    break;
                }
                None => {
                    return Err(Fail::Issue(
                        IssueCategory::MalformedStatement,
                        "unterminated collection".into(),
                    ))
                }
                Some(Tok::Dot) => {
                    return Err(Fail::Issue(
                        IssueCategory::MalformedStatement,
                        "expected ')'".into(),
                    ))
                }
                _ => items.push(self.object()?),
            }
        }
        if items.is_empty() {
            return Ok(Term::iri(RDF_NIL));
        }
        let nodes: Vec<Term> = items.iter().map(|_| self.fresh_blank()).collect();
        for (i, item) in items.into_iter().enumerate() {
            self.pending.push(Triple::new(
                nodes[i].clone(),
                Term::iri(RDF_FIRST),
                item,
            ));
            let rest = nodes.get(i + 1).cloned().unwrap_or_else(|| Term::iri(RDF_NIL));
            self.pending
                .push(Triple::new(nodes[i].clone(), Term::iri(RDF_REST), rest));
        }
        Ok(nodes[0].clone())
    }

    fn fresh_blank(&mut self) -> Term {
        let id = format!("b{}", self.bnode_counter);
        self.bnode_counter += 1;
        Term::blank(id)
    }

    fn labelled_blank(&mut self, label: &str) -> Term {
        if let Some(id) = self.bnode_labels.get(label) {
            return Term::blank(id.clone());
        }
        let node = self.fresh_blank();
        self.bnode_labels.insert(label.to_string(), node.value.clone());
        node
    }

    fn expand(&mut self, prefix: &str, local: &str) -> String {
        match self.prefixes.get(prefix) {
            Some(ns) => format!("{ns}{local}"),
            None => {
                if self.missing_seen.insert(prefix.to_string()) {
                    let offset = self.tokens[self.pos - 1].start;
                    let (line, column) = self.line_col(offset);
                    self.issues.push(SyntaxIssue {
                        category: IssueCategory::MissingPrefix,
                        line,
                        column,
                        message: format!("undeclared prefix '{prefix}:'"),
                        offending_token: format!("{prefix}:"),
                    });
                }
                format!("urn:x-undeclared:{prefix}:{local}")
            }
        }
    }

    fn resolve(&self, iri: &str) -> PResult<String> {
        if has_scheme(iri) {
            return Ok(iri.to_string());
        }
        let Some(base) = &self.base else {
            return Err(Fail::Issue(
                IssueCategory::BadIri,
                format!("relative IRI <{iri}> without a base"),
            ));
        };
        let joined = url::Url::parse(base).and_then(|b| b.join(iri));
        match joined {
            Ok(u) => Ok(u.to_string()),
            Err(e) => Err(Fail::Issue(
                IssueCategory::BadIri,
                format!("cannot resolve <{iri}>: {e}"),
            )),
        }
    }
}

fn has_scheme(iri: &str) -> bool {
    let Some(colon) = iri.find(':') else { return false };
    let scheme = &iri[..colon];
    let mut chars = scheme.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}
