//! Automated fixes: undeclared well-known prefixes and the missing TBox import.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::vocab::{repair_namespace, OWL_IMPORTS, OWL_ONTOLOGY};
use crate::rdf::{parse_lenient, parse_turtle, Graph, SyntaxIssue, Term, Triple};

/// Subject used for the import when the document names no ontology at all.
pub const FALLBACK_ONTOLOGY: &str = "urn:x-capgen:ontology";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixDecl {
    pub label: String,
    pub namespace: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairLog {
    pub added_prefixes: Vec<PrefixDecl>,
    pub added_imports: Vec<String>,
    pub other_edits: Vec<String>,
}

impl RepairLog {
    pub fn is_empty(&self) -> bool {
        self.added_prefixes.is_empty() && self.added_imports.is_empty() && self.other_edits.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Repaired {
    pub graph: Graph,
    pub text: String,
    pub log: RepairLog,
}

#[derive(Debug, Clone, Error)]
#[error("{} syntax issue(s) remain after repair, first: {}", issues.len(), issues[0])]
pub struct RepairError {
    pub log: RepairLog,
    pub issues: Vec<SyntaxIssue>,
}

fn ontology_node(g: &Graph) -> Term {
    if let Some(node) = g.subjects_of_type(OWL_ONTOLOGY).next() {
        return node.clone();
    }
    match g.prefixes().get("") {
        Some(ns) if !ns.is_empty() => {
            let trimmed = ns.trim_end_matches(['#', '/']);
            Term::iri(if trimmed.is_empty() { ns.as_str() } else { trimmed })
        }
        _ => Term::iri(FALLBACK_ONTOLOGY),
    }
}

pub fn repair(ontology_text: &str, tbox_iri: &str) -> Result<Repaired, RepairError> {
    let first = parse_lenient(ontology_text, None);
    let mut log = RepairLog::default();
    let mut header = String::new();
    for label in first.missing_prefixes() {
        if let Some(ns) = repair_namespace(&label) {
            header.push_str(&format!("@prefix {label}: <{ns}> .\n"));
            log.added_prefixes.push(PrefixDecl {
                label,
                namespace: ns.to_string(),
            });
        }
    }
    let mut text = header + ontology_text;
    let mut graph = match parse_turtle(&text, None) {
        Ok(g) => g,
        Err(issues) => return Err(RepairError { log, issues }),
    };

    let tbox = Term::iri(tbox_iri);
    let imported = graph
        .with_predicate(OWL_IMPORTS)
        .any(|t| t.object == tbox);
    if !imported {
        let node = ontology_node(&graph);
        if !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&format!("{} <{OWL_IMPORTS}> {} .\n", node, tbox));
        graph.insert(Triple::new(node, Term::iri(OWL_IMPORTS), tbox));
        log.added_imports.push(tbox_iri.to_string());
    }
    Ok(Repaired { graph, text, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::vocab::{CASK, RDF_TYPE};

    const TBOX: &str = "http://www.w3id.org/hsu-aut/cask";

    #[test]
    fn adds_missing_cask_prefix() {
        let doc = format!(
            "@prefix owl: <http://www.w3.org/2002/07/owl#> .\n<http://x/o> a owl:Ontology ; owl:imports <{TBOX}> .\n<http://x/c> a cask:Capability .\n"
        );
        let r = repair(&doc, TBOX).unwrap();
        assert_eq!(r.log.added_prefixes.len(), 1);
        assert_eq!(r.log.added_prefixes[0].label, "cask");
        assert!(r.log.added_imports.is_empty());
        assert!(r.graph.contains(&Triple::new(
            Term::iri("http://x/c"),
            Term::iri(RDF_TYPE),
            Term::iri(format!("{CASK}Capability"))
        )));
        assert_eq!(parse_turtle(&r.text, None).unwrap(), r.graph);
    }

    #[test]
    fn adds_import_to_ontology_node() {
        let doc = "@prefix : <http://x/parity#> .\n@prefix owl: <http://www.w3.org/2002/07/owl#> .\n:a :p :b .\n";
        let r = repair(doc, TBOX).unwrap();
        assert_eq!(r.log.added_imports, vec![TBOX.to_string()]);
        assert!(r.graph.contains(&Triple::new(Term::iri("http://x/parity"), Term::iri(OWL_IMPORTS), Term::iri(TBOX))));
        assert_eq!(parse_turtle(&r.text, None).unwrap(), r.graph);

        let r = repair("<http://x/o> a <http://www.w3.org/2002/07/owl#Ontology> .", TBOX).unwrap();
        assert!(r.graph.contains(&Triple::new(Term::iri("http://x/o"), Term::iri(OWL_IMPORTS), Term::iri(TBOX))));
        let r = repair("<http://x/a> <http://x/p> 1 .", TBOX).unwrap();
        assert!(r.graph.contains(&Triple::new(Term::iri(FALLBACK_ONTOLOGY), Term::iri(OWL_IMPORTS), Term::iri(TBOX))));
    }

    #[test]
    fn complete_document_is_a_fixpoint() {
        let doc = format!("<http://x/o> <{OWL_IMPORTS}> <{TBOX}> .\n");
        let r = repair(&doc, TBOX).unwrap();
        assert!(r.log.is_empty());
        assert_eq!(r.text, doc);
        let again = repair(&r.text, TBOX).unwrap();
        assert!(again.log.is_empty());
    }

    #[test]
    fn unknown_prefix_and_real_errors_remain() {
        let err = repair("foo:a foo:b foo:c .", TBOX).unwrap_err();
        assert!(!err.issues.is_empty());
        assert!(repair("<http://x/a> <http://x/p> .", TBOX).is_err());
    }
}
