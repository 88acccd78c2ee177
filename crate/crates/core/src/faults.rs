//! Controlled corruption of gold ontologies with a known expected score.
//!
//! Used to build replay fixtures and to check the pipeline against counts
//! that are known by construction.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::consistency::TBoxIndex;
use crate::rdf::vocab::{repair_namespace, CASK, OWL_IMPORTS, RDFS, RDF_TYPE, XSD};
use crate::rdf::{serialize_turtle, Graph, Term, Triple};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultSpec {
    /// k1: well-known prefix declarations to drop from the text
    pub prefix_removals: usize,
    /// k2: nodes that get an extra type disjoint with one they already have
    pub disjoint_injections: usize,
    /// k3: extra triples on closed-shape targets
    pub closed_extras: usize,
    /// k4: gold triples to delete at random
    pub deletions: usize,
    pub drop_imports: bool,
    /// deleted in addition to the random ones
    pub forced_deletions: Vec<Triple>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FaultError {
    #[error("only {available} candidate(s) for {what}, {wanted} requested")]
    NotEnough {
        what: &'static str,
        wanted: usize,
        available: usize,
    },
    #[error("forced deletion {0} is not in the gold graph")]
    UnknownTriple(String),
}

#[derive(Debug, Clone)]
pub struct FaultedDoc {
    pub text: String,
    pub graph: Graph,
    pub removed_prefixes: Vec<String>,
    pub injected_types: Vec<Triple>,
    pub extras: Vec<Triple>,
    pub deleted: Vec<Triple>,
    pub dropped_import: bool,
}

const CAPABILITY: &str = "http://www.w3id.org/hsu-aut/cask#Capability";
const DATA_ELEMENT: &str = "http://www.w3id.org/hsu-aut/DINEN61360#Data_Element";

/// A class disjoint with one of `types` (after subclass closure), if any.
fn clashing_class(idx: &TBoxIndex, types: &BTreeSet<String>) -> Option<&'static str> {
    const CANDIDATES: [&str; 2] = [
        "http://www.w3id.org/hsu-aut/VDI3682#TechnicalResource",
        "http://www.w3id.org/hsu-aut/VDI3682#Product",
    ];
    CANDIDATES.into_iter().find(|c| {
        types
            .iter()
            .flat_map(|t| idx.superclasses(t))
            .any(|s| idx.is_disjoint(&s, c))
    })
}

fn take<T: Clone>(pool: &[T], n: usize, what: &'static str, rng: &mut impl Rng) -> Result<Vec<T>, FaultError> {
    if pool.len() < n {
        return Err(FaultError::NotEnough {
            what,
            wanted: n,
            available: pool.len(),
        });
    }
    Ok(pool.choose_multiple(rng, n).cloned().collect())
}

pub fn inject(gold: &Graph, idx: &TBoxIndex, spec: &FaultSpec, rng: &mut impl Rng) -> Result<FaultedDoc, FaultError> {
    let mut g = gold.clone();
    let local_ns = gold.prefixes().get("").cloned().unwrap_or_else(|| "urn:x-fault:".to_string());
    let rdf_type = Term::iri(RDF_TYPE);

    // k2: one extra, clashing type per chosen node
    let typed: Vec<(Term, &'static str)> = gold
        .type_map()
        .into_iter()
        .filter(|(n, _)| n.is_iri())
        .filter_map(|(n, ts)| clashing_class(idx, &ts).map(|c| (n, c)))
        .collect();
    let injected_types: Vec<Triple> = take(&typed, spec.disjoint_injections, "disjoint injections", rng)?
        .into_iter()
        .map(|(n, c)| Triple::new(n, rdf_type.clone(), Term::iri(c)))
        .collect();

    // k3: predicates outside the closed shapes' allow lists
    let targets: Vec<(Term, bool)> = gold
        .type_map()
        .into_iter()
        .filter(|(n, ts)| n.is_iri() && (ts.contains(CAPABILITY) || ts.contains(DATA_ELEMENT)))
        .map(|(n, ts)| (n, ts.contains(CAPABILITY)))
        .collect();
    let mut extras = Vec::new();
    if spec.closed_extras > 0 && targets.is_empty() {
        return Err(FaultError::NotEnough {
            what: "closed-shape targets",
            wanted: spec.closed_extras,
            available: 0,
        });
    }
    for i in 0..spec.closed_extras {
        let (node, is_cap) = targets.choose(rng).expect("non-empty").clone();
        let pick = rng.gen_range(0..if is_cap { 4 } else { 2 });
        let t = match (pick, is_cap) {
            (0, _) => Triple::new(node, Term::iri(format!("{RDFS}seeAlso")), Term::iri(format!("{local_ns}Reference{i}"))),
            (1, _) => Triple::new(node, Term::iri(format!("{local_ns}hasPriority")), Term::typed(i.to_string(), format!("{XSD}integer"))),
            (2, _) => Triple::new(node, Term::iri(format!("{CASK}isRealizedBy")), Term::iri(format!("{local_ns}Skill{i}"))),
            _ => Triple::new(node, Term::iri(format!("{CASK}providedBy")), Term::iri(format!("{local_ns}Resource{i}"))),
        };
        extras.push(t);
    }

    // k4: never blank-node edges, the import, or types the other faults rely on
    let protected: BTreeSet<&Term> = injected_types
        .iter()
        .chain(extras.iter())
        .map(|t| &t.subject)
        .collect();
    let forced: BTreeSet<&Triple> = spec.forced_deletions.iter().collect();
    let deletable: Vec<Triple> = gold
        .iter()
        .filter(|t| !t.object.is_blank())
        .filter(|t| t.predicate.value != OWL_IMPORTS)
        .filter(|t| !(t.predicate.value == RDF_TYPE && protected.contains(&t.subject)))
        .filter(|t| !forced.contains(t))
        .cloned()
        .collect();
    let mut deleted = spec.forced_deletions.clone();
    for t in &deleted {
        if !gold.contains(t) {
            return Err(FaultError::UnknownTriple(t.to_string()));
        }
    }
    deleted.extend(take(&deletable, spec.deletions, "deletions", rng)?);
    let dropped_import = spec.drop_imports && gold.with_predicate(OWL_IMPORTS).next().is_some();
    if dropped_import {
        let imports: Vec<Triple> = gold.with_predicate(OWL_IMPORTS).cloned().collect();
        deleted.extend(imports);
    }

    for t in &deleted {
        g.remove(t);
    }
    g.extend(injected_types.iter().cloned());
    g.extend(extras.iter().cloned());

    // k1: drop declarations the repair step knows how to restore
    let mut text = serialize_turtle(&g);
    let removable: Vec<String> = text
        .lines()
        .filter_map(|l| {
            let rest = l.strip_prefix("@prefix ")?;
            let (label, ns) = rest.split_once(": <")?;
            let ns = ns.strip_suffix("> .")?;
            (repair_namespace(label) == Some(ns)).then(|| label.to_string())
        })
        .collect();
    let mut removed_prefixes = take(&removable, spec.prefix_removals, "prefix removals", rng)?;
    removed_prefixes.sort();
    text = text
        .lines()
        .filter(|l| {
            !removed_prefixes
                .iter()
                .any(|p| l.starts_with(&format!("@prefix {p}: <")))
        })
        .map(|l| format!("{l}\n"))
        .collect();

    Ok(FaultedDoc {
        text,
        graph: g,
        removed_prefixes,
        injected_types,
        extras,
        deleted,
        dropped_import,
    })
}
