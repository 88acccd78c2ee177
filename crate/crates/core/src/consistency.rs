//! Lightweight OWL consistency checking: subclass closure, disjointness,
//! domain/range typing, datatype ranges and functional properties.
//!
//! This is deliberately not a tableau reasoner. Restrictions, inverse
//! properties, property chains, nominals and cardinalities other than
//! functionality are listed as ignored constructs when a TBox is indexed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rdf::vocab::*;
use crate::rdf::{Graph, Term, Triple};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TBoxIndex {
    /// class -> all superclasses, including itself
    pub subclass_closure: BTreeMap<String, BTreeSet<String>>,
    /// unordered pairs stored as (min, max)
    pub disjoint_pairs: BTreeSet<(String, String)>,
    pub domain: BTreeMap<String, BTreeSet<String>>,
    /// class ranges of object properties
    pub range: BTreeMap<String, BTreeSet<String>>,
    /// datatype ranges of data properties
    pub datatype_range: BTreeMap<String, BTreeSet<String>>,
    pub functional: BTreeSet<String>,
    /// construct IRI -> number of occurrences skipped
    pub ignored: BTreeMap<String, usize>,
}

const IGNORED_PREDICATES: &[&str] = &[
    "http://www.w3.org/2002/07/owl#inverseOf",
    "http://www.w3.org/2002/07/owl#unionOf",
    "http://www.w3.org/2002/07/owl#intersectionOf",
    "http://www.w3.org/2002/07/owl#complementOf",
    "http://www.w3.org/2002/07/owl#oneOf",
    "http://www.w3.org/2002/07/owl#propertyChainAxiom",
    "http://www.w3.org/2002/07/owl#hasKey",
    "http://www.w3.org/2002/07/owl#equivalentProperty",
    "http://www.w3.org/2002/07/owl#propertyDisjointWith",
    "http://www.w3.org/2002/07/owl#disjointUnionOf",
    "http://www.w3.org/2000/01/rdf-schema#subPropertyOf",
];

const IGNORED_TYPES: &[&str] = &[
    "http://www.w3.org/2002/07/owl#Restriction",
    "http://www.w3.org/2002/07/owl#InverseFunctionalProperty",
    "http://www.w3.org/2002/07/owl#TransitiveProperty",
    "http://www.w3.org/2002/07/owl#SymmetricProperty",
    "http://www.w3.org/2002/07/owl#AsymmetricProperty",
    "http://www.w3.org/2002/07/owl#ReflexiveProperty",
    "http://www.w3.org/2002/07/owl#IrreflexiveProperty",
    "http://www.w3.org/2002/07/owl#AllDisjointProperties",
];

impl TBoxIndex {
    /// Superclasses of `class`, itself included even when the TBox never mentions it.
    pub fn superclasses(&self, class: &str) -> BTreeSet<String> {
        match self.subclass_closure.get(class) {
            Some(s) => s.clone(),
            None => BTreeSet::from([class.to_string()]),
        }
    }

    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        sub == sup
            || self
                .subclass_closure
                .get(sub)
                .is_some_and(|s| s.contains(sup))
    }

    pub fn is_disjoint(&self, a: &str, b: &str) -> bool {
        self.disjoint_pairs.contains(&pair(a, b))
    }
}

fn pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn is_datatype_iri(iri: &str, declared: &BTreeSet<String>) -> bool {
    iri.starts_with(XSD)
        || matches!(
            iri,
            RDFS_LITERAL | RDF_LANG_STRING | RDF_PLAIN_LITERAL | RDF_XML_LITERAL
        )
        || declared.contains(iri)
}

pub fn index_tbox(tbox: &Graph) -> TBoxIndex {
    let mut idx = TBoxIndex::default();
    let mut direct: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut classes: BTreeSet<String> = BTreeSet::new();
    let mut declared_datatypes: BTreeSet<String> = BTreeSet::new();
    let mut data_properties: BTreeSet<String> = BTreeSet::new();

    for t in tbox.iter() {
        if t.is_type() && t.object.is_iri() {
            match t.object.value.as_str() {
                OWL_CLASS if t.subject.is_iri() => {
                    classes.insert(t.subject.value.clone());
                }
                RDFS_DATATYPE if t.subject.is_iri() => {
                    declared_datatypes.insert(t.subject.value.clone());
                }
                OWL_DATATYPE_PROPERTY => {
                    data_properties.insert(t.subject.value.clone());
                }
                OWL_FUNCTIONAL_PROPERTY => {
                    idx.functional.insert(t.subject.value.clone());
                }
                other if IGNORED_TYPES.contains(&other) => {
                    *idx.ignored.entry(other.to_string()).or_default() += 1;
                }
                _ => {}
            }
        }
        let p = t.predicate.value.as_str();
        if IGNORED_PREDICATES.contains(&p) {
            *idx.ignored.entry(p.to_string()).or_default() += 1;
        }
    }

    for t in tbox.iter() {
        let p = t.predicate.value.as_str();
        match p {
            RDFS_SUBCLASS_OF | OWL_EQUIVALENT_CLASS => {
                if t.subject.is_iri() && t.object.is_iri() {
                    direct
                        .entry(t.subject.value.clone())
                        .or_default()
                        .insert(t.object.value.clone());
                    if p == OWL_EQUIVALENT_CLASS {
                        direct
                            .entry(t.object.value.clone())
                            .or_default()
                            .insert(t.subject.value.clone());
                    }
                    classes.insert(t.subject.value.clone());
                    classes.insert(t.object.value.clone());
                } else {
                    *idx.ignored.entry(format!("{p} (class expression)")).or_default() += 1;
                }
            }
            RDFS_DOMAIN if t.object.is_iri() && t.subject.is_iri() && t.subject.value != RDF_TYPE => {
                idx.domain
                    .entry(t.subject.value.clone())
                    .or_default()
                    .insert(t.object.value.clone());
            }
            RDFS_RANGE if t.object.is_iri() && t.subject.is_iri() && t.subject.value != RDF_TYPE => {
                let prop = t.subject.value.clone();
                let r = t.object.value.clone();
                if is_datatype_iri(&r, &declared_datatypes) || data_properties.contains(&prop) {
                    idx.datatype_range.entry(prop).or_default().insert(r);
                } else {
                    idx.range.entry(prop).or_default().insert(r);
                }
            }
            RDFS_DOMAIN | RDFS_RANGE => {
                *idx.ignored.entry(format!("{p} (class expression)")).or_default() += 1;
            }
            _ => {}
        }
    }

    // reflexive-transitive closure; cycles terminate because of the visited set
    for c in &classes {
        let mut seen = BTreeSet::from([c.clone()]);
        let mut stack = vec![c.clone()];
        while let Some(x) = stack.pop() {
            if let Some(sups) = direct.get(&x) {
                for s in sups {
                    if seen.insert(s.clone()) {
                        stack.push(s.clone());
                    }
                }
            }
        }
        idx.subclass_closure.insert(c.clone(), seen);
    }

    let mut declared: BTreeSet<(String, String)> = BTreeSet::new();
    for t in tbox.with_predicate(OWL_DISJOINT_WITH) {
        if t.subject.is_iri() && t.object.is_iri() {
            declared.insert(pair(&t.subject.value, &t.object.value));
        }
    }
    for node in tbox.subjects_of_type(OWL_ALL_DISJOINT_CLASSES) {
        for head in tbox.objects(node, OWL_MEMBERS) {
            let Some(items) = tbox.list_items(head) else { continue };
            let members: Vec<&str> = items.iter().filter_map(|t| t.as_iri()).collect();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    declared.insert(pair(a, b));
                }
            }
        }
    }
    // close downward through subclasses
    let mut subs: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (c, sups) in &idx.subclass_closure {
        for s in sups {
            subs.entry(s.as_str()).or_default().push(c.as_str());
        }
    }
    let mut pairs = BTreeSet::new();
    for (a, b) in &declared {
        let sa = subs.get(a.as_str()).cloned().unwrap_or_else(|| vec![a.as_str()]);
        let sb = subs.get(b.as_str()).cloned().unwrap_or_else(|| vec![b.as_str()]);
        for x in &sa {
            for y in &sb {
                pairs.insert(pair(x, y));
            }
        }
    }
    idx.disjoint_pairs = pairs;
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SupportKind {
    Asserted,
    Domain,
    Range,
}

/// Why a node has a type: the preferred base fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Support {
    pub kind: SupportKind,
    pub triple: Triple,
}

/// node -> class -> preferred support (asserted before domain before range, then triple order)
pub type TypeDerivations = BTreeMap<Term, BTreeMap<String, Support>>;

pub fn derive_types(abox: &Graph, idx: &TBoxIndex) -> TypeDerivations {
    let mut out: TypeDerivations = BTreeMap::new();
    let mut offer = |node: &Term, class: &str, kind: SupportKind, t: &Triple| {
        for c in idx.superclasses(class) {
            let cand = Support {
                kind,
                triple: t.clone(),
            };
            let slot = out.entry(node.clone()).or_default();
            match slot.get(&c) {
                Some(cur) if *cur <= cand => {}
                _ => {
                    slot.insert(c, cand);
                }
            }
        }
    };
    for t in abox.iter() {
        if t.is_type() {
            if t.object.is_iri() {
                offer(&t.subject, &t.object.value, SupportKind::Asserted, t);
            }
            continue;
        }
        if let Some(ds) = idx.domain.get(&t.predicate.value) {
            for d in ds {
                offer(&t.subject, d, SupportKind::Domain, t);
            }
        }
        if !t.object.is_literal() {
            if let Some(rs) = idx.range.get(&t.predicate.value) {
                for r in rs {
                    offer(&t.object, r, SupportKind::Range, t);
                }
            }
        }
    }
    out
}

/// The abox plus every rdf:type triple entailed by domain, range and subclass closure.
pub fn infer_types(abox: &Graph, idx: &TBoxIndex) -> Graph {
    let mut g = abox.clone();
    let rdf_type = Term::iri(RDF_TYPE);
    for (node, classes) in derive_types(abox, idx) {
        for c in classes.keys() {
            g.insert(Triple::new(node.clone(), rdf_type.clone(), Term::iri(c.clone())));
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContradictionKind {
    DisjointTypes,
    RangeClash,
    DatatypeClash,
    FunctionalClash,
}

impl fmt::Display for ContradictionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContradictionKind::DisjointTypes => "DISJOINT_TYPES",
            ContradictionKind::RangeClash => "RANGE_CLASH",
            ContradictionKind::DatatypeClash => "DATATYPE_CLASH",
            ContradictionKind::FunctionalClash => "FUNCTIONAL_CLASH",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contradiction {
    pub kind: ContradictionKind,
    /// the individual whose types or values clash
    pub node: Term,
    /// sorted, duplicate free
    pub witness_triples: Vec<Triple>,
    pub explanation: String,
}

impl Contradiction {
    /// The witness as N-Triples lines, for manual inspection.
    pub fn witness_ntriples(&self) -> String {
        self.witness_triples
            .iter()
            .map(|t| format!("{t}\n"))
            .collect()
    }
}

/// Contradictions of the raw (un-inferred) abox; type inference happens inside.
///
/// Passing an already inferred graph is allowed but makes the inferred type
/// triples look asserted, so witnesses may cite them.
pub fn check_consistency(abox: &Graph, idx: &TBoxIndex) -> Vec<Contradiction> {
    let derivations = derive_types(abox, idx);
    let mut found: BTreeMap<(ContradictionKind, Vec<Triple>), (Term, String)> = BTreeMap::new();
    let mut record = |kind, node: &Term, mut witness: Vec<Triple>, explanation: String| {
        witness.sort();
        witness.dedup();
        found.entry((kind, witness)).or_insert((node.clone(), explanation));
    };

    for (node, types) in &derivations {
        for (a, b, kind, witness) in clashing_pairs(types, idx) {
            record(
                kind,
                node,
                witness,
                format!("{node} is an instance of disjoint classes <{a}> and <{b}>"),
            );
        }
    }

    for t in abox.iter() {
        if !t.object.is_literal() {
            continue;
        }
        let Some(ranges) = idx.datatype_range.get(&t.predicate.value) else {
            continue;
        };
        if let Some(r) = ranges.iter().find(|r| !literal_fits(&t.object, r)) {
            record(
                ContradictionKind::DatatypeClash,
                &t.subject,
                vec![t.clone()],
                format!(
                    "value {} of <{}> is outside its declared range <{r}>",
                    t.object, t.predicate.value
                ),
            );
        }
    }

    let mut by_subject: BTreeMap<(&Term, &str), Vec<&Triple>> = BTreeMap::new();
    for t in abox.iter() {
        if idx.functional.contains(&t.predicate.value) {
            by_subject
                .entry((&t.subject, t.predicate.value.as_str()))
                .or_default()
                .push(t);
        }
    }
    for ((s, p), ts) in by_subject {
        for (i, t1) in ts.iter().enumerate() {
            for t2 in &ts[i + 1..] {
                if let Some(evidence) = distinct_values(&t1.object, &t2.object, abox, &derivations, idx) {
                    let mut witness = vec![(*t1).clone(), (*t2).clone()];
                    witness.extend(evidence);
                    record(
                        ContradictionKind::FunctionalClash,
                        s,
                        witness,
                        format!(
                            "functional property <{p}> gives {s} two different values {} and {}",
                            t1.object, t2.object
                        ),
                    );
                }
            }
        }
    }

    found
        .into_iter()
        .map(|((kind, witness_triples), (node, explanation))| Contradiction {
            kind,
            node,
            witness_triples,
            explanation,
        })
        .collect()
}

/// Most specific disjoint pairs among a node's types, with their witnesses.
fn clashing_pairs(
    types: &BTreeMap<String, Support>,
    idx: &TBoxIndex,
) -> Vec<(String, String, ContradictionKind, Vec<Triple>)> {
    let names: Vec<&String> = types.keys().collect();
    let mut pairs: Vec<(&String, &String)> = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i..] {
            if idx.is_disjoint(a, b) {
                pairs.push((a, b));
            }
        }
    }
    let dominated = |(a, b): (&String, &String)| {
        pairs.iter().any(|&(x, y)| {
            (x, y) != (a, b)
                && ((idx.is_subclass(x, a) && idx.is_subclass(y, b))
                    || (idx.is_subclass(x, b) && idx.is_subclass(y, a)))
        })
    };
    pairs
        .iter()
        .filter(|p| !dominated(**p))
        .map(|&(a, b)| {
            let sa = &types[a];
            let sb = &types[b];
            let kind = if sa.kind == SupportKind::Range || sb.kind == SupportKind::Range {
                ContradictionKind::RangeClash
            } else {
                ContradictionKind::DisjointTypes
            };
            (a.clone(), b.clone(), kind, vec![sa.triple.clone(), sb.triple.clone()])
        })
        .collect()
}

fn literal_fits(lit: &Term, range: &str) -> bool {
    if range == RDFS_LITERAL {
        return true;
    }
    if lit.language.is_some() {
        return matches!(range, RDF_LANG_STRING | RDF_PLAIN_LITERAL);
    }
    let dt = lit.datatype.as_deref().unwrap_or(XSD_STRING);
    let compatible = if dt == range {
        true
    } else if is_integer_type(dt) {
        is_integer_type(range) || range == XSD_DECIMAL
    } else if dt == XSD_STRING {
        range == RDF_PLAIN_LITERAL
    } else {
        // an unknown datatype on either side cannot be judged
        !(range.starts_with(XSD) && dt.starts_with(XSD))
    };
    compatible && lexically_valid(lit)
}

fn lexically_valid(lit: &Term) -> bool {
    let v = lit.value.trim();
    match lit.datatype.as_deref() {
        Some(dt) if is_integer_type(dt) => canonical_decimal(v).is_some() && !v.contains('.'),
        Some(XSD_DECIMAL) => canonical_decimal(v).is_some(),
        Some(XSD_BOOLEAN) => matches!(v, "true" | "false" | "1" | "0"),
        Some(XSD_DOUBLE) | Some(XSD_FLOAT) => v.parse::<f64>().is_ok() || matches!(v, "INF" | "-INF" | "NaN"),
        _ => true,
    }
}

/// Canonical decimal text: no sign on zero, no leading zeros, no trailing fractional zeros.
fn canonical_decimal(v: &str) -> Option<String> {
    let (neg, digits) = match v.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, v.strip_prefix('+').unwrap_or(v)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let body = if frac.is_empty() {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    };
    if neg && body != "0" {
        Some(format!("-{body}"))
    } else {
        Some(body)
    }
}

/// Value-space key used to decide whether two literals denote different values.
pub fn canonical_literal(lit: &Term) -> String {
    let v = lit.value.trim();
    if let Some(lang) = &lit.language {
        return format!("lang:{}@{lang}", lit.value);
    }
    match lit.datatype.as_deref() {
        Some(dt) if is_integer_type(dt) || dt == XSD_DECIMAL => match canonical_decimal(v) {
            Some(c) => format!("num:{c}"),
            None => format!("bad:{dt}:{}", lit.value),
        },
        Some(XSD_BOOLEAN) => match v {
            "true" | "1" => "bool:true".into(),
            "false" | "0" => "bool:false".into(),
            _ => format!("bad:{XSD_BOOLEAN}:{}", lit.value),
        },
        Some(dt @ (XSD_DOUBLE | XSD_FLOAT)) => match v.parse::<f64>() {
            Ok(f) => format!("float:{dt}:{f:e}"),
            Err(_) => format!("bad:{dt}:{}", lit.value),
        },
        Some(XSD_STRING) | None => format!("str:{}", lit.value),
        Some(dt) => format!("dt:{dt}:{}", lit.value),
    }
}

/// Evidence that two values of a functional property are necessarily different.
fn distinct_values(
    a: &Term,
    b: &Term,
    abox: &Graph,
    derivations: &TypeDerivations,
    idx: &TBoxIndex,
) -> Option<Vec<Triple>> {
    match (a.is_literal(), b.is_literal()) {
        (true, true) => {
            if canonical_literal(a) != canonical_literal(b) {
                Some(Vec::new())
            } else {
                None
            }
        }
        (false, false) => {
            for (x, y) in [(a, b), (b, a)] {
                if let Some(t) = abox
                    .objects(x, OWL_DIFFERENT_FROM)
                    .find(|o| *o == y)
                    .map(|_| Triple::new(x.clone(), Term::iri(OWL_DIFFERENT_FROM), y.clone()))
                {
                    return Some(vec![t]);
                }
            }
            let ta = derivations.get(a)?;
            let tb = derivations.get(b)?;
            for (ca, sa) in ta {
                for (cb, sb) in tb {
                    if idx.is_disjoint(ca, cb) {
                        return Some(vec![sa.triple.clone(), sb.triple.clone()]);
                    }
                }
            }
            None
        }
        _ => None,
    }
}
