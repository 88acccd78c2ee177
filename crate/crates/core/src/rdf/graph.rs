use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;

use super::term::{Term, Triple};
use super::vocab::{RDF_FIRST, RDF_NIL, RDF_REST, RDF_TYPE};

/// A set of triples plus the prefix map and base it was written with.
/// Equality compares triples only.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    prefixes: IndexMap<String, String>,
    base: Option<String>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn insert(&mut self, t: Triple) -> bool {
        self.triples.insert(t)
    }

    pub fn remove(&mut self, t: &Triple) -> bool {
        self.triples.remove(t)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn prefixes(&self) -> &IndexMap<String, String> {
        &self.prefixes
    }

    /// Redeclaring a label replaces the namespace (last wins).
    pub fn set_prefix(&mut self, label: impl Into<String>, ns: impl Into<String>) {
        self.prefixes.insert(label.into(), ns.into());
    }

    pub fn base(&self) -> Option<&str> {
        self.base.as_deref()
    }

    pub fn set_base(&mut self, base: Option<String>) {
        self.base = base;
    }

    pub fn extend(&mut self, triples: impl IntoIterator<Item = Triple>) {
        self.triples.extend(triples);
    }

    pub fn with_triples_of(&self, triples: impl IntoIterator<Item = Triple>) -> Graph {
        Graph {
            triples: triples.into_iter().collect(),
            prefixes: self.prefixes.clone(),
            base: self.base.clone(),
        }
    }

    pub fn objects<'a>(&'a self, s: &'a Term, p: &'a str) -> impl Iterator<Item = &'a Term> + 'a {
        self.triples
            .range(lower_bound(s)..)
            .take_while(move |t| &t.subject == s)
            .filter(move |t| t.predicate.value == p)
            .map(|t| &t.object)
    }

    pub fn about<'a>(&'a self, s: &'a Term) -> impl Iterator<Item = &'a Triple> + 'a {
        self.triples
            .range(lower_bound(s)..)
            .take_while(move |t| &t.subject == s)
    }

    pub fn with_predicate<'a>(&'a self, p: &'a str) -> impl Iterator<Item = &'a Triple> + 'a {
        self.triples.iter().filter(move |t| t.predicate.value == p)
    }

    pub fn subjects_of_type<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a Term> + 'a {
        self.triples
            .iter()
            .filter(move |t| t.predicate.value == RDF_TYPE && t.object.value == class && t.object.is_iri())
            .map(|t| &t.subject)
    }

    /// Asserted rdf:type IRIs per node.
    pub fn type_map(&self) -> BTreeMap<Term, BTreeSet<String>> {
        let mut out: BTreeMap<Term, BTreeSet<String>> = BTreeMap::new();
        for t in self.with_predicate(RDF_TYPE) {
            if t.object.is_iri() {
                out.entry(t.subject.clone()).or_default().insert(t.object.value.clone());
            }
        }
        out
    }

    /// Members of an RDF collection starting at `head`; None if malformed or cyclic.
    pub fn list_items(&self, head: &Term) -> Option<Vec<Term>> {
        let mut items = Vec::new();
        let mut cur = head.clone();
        let mut seen = BTreeSet::new();
        loop {
            if cur.is_iri() && cur.value == RDF_NIL {
                return Some(items);
            }
            if !seen.insert(cur.clone()) {
                return None;
            }
            let first = self.objects(&cur, RDF_FIRST).next()?.clone();
            let rest = self.objects(&cur, RDF_REST).next()?.clone();
            items.push(first);
            cur = rest;
        }
    }

    pub fn blank_nodes(&self) -> BTreeSet<&Term> {
        let mut out = BTreeSet::new();
        for t in &self.triples {
            if t.subject.is_blank() {
                out.insert(&t.subject);
            }
            if t.object.is_blank() {
                out.insert(&t.object);
            }
        }
        out
    }
}

fn lower_bound(s: &Term) -> Triple {
    Triple {
        subject: s.clone(),
        predicate: Term::iri(""),
        object: Term::iri(""),
    }
}

pub fn count_triples(g: &Graph) -> usize {
    g.len()
}
