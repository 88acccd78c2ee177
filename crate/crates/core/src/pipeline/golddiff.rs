//! Deterministic node alignment between a gold ontology and a generated one,
//! and the list of gold triples the generated graph lacks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::rdf::{Graph, Term, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignReason {
    ExactIri,
    Similarity,
    BlankPath,
    BlankType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub gold: Term,
    pub generated: Term,
    pub reason: AlignReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    /// gold subjects with no counterpart
    pub unmatched: Vec<Term>,
    /// gold triples absent after mapping through `pairs`
    pub missing: Vec<Triple>,
}

impl Alignment {
    pub fn map(&self, gold: &Term) -> Option<&Term> {
        self.pairs.iter().find(|p| &p.gold == gold).map(|p| &p.generated)
    }

    /// A gold triple translated into the generated graph's node names.
    pub fn translate(&self, t: &Triple) -> Triple {
        let m = |x: &Term| self.map(x).cloned().unwrap_or_else(|| x.clone());
        Triple::new(m(&t.subject), t.predicate.clone(), m(&t.object))
    }
}

fn subjects(g: &Graph) -> BTreeSet<Term> {
    g.iter().map(|t| t.subject.clone()).collect()
}

fn jaccard(a: Option<&BTreeSet<String>>, b: Option<&BTreeSet<String>>) -> f64 {
    let empty = BTreeSet::new();
    let (a, b) = (a.unwrap_or(&empty), b.unwrap_or(&empty));
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn name_similarity(a: &Term, b: &Term) -> f64 {
    strsim::normalized_levenshtein(&a.local_name().to_lowercase(), &b.local_name().to_lowercase())
}

/// Without any shared type two nodes still align when their names are this close.
const NAME_ONLY_THRESHOLD: f64 = 0.8;

struct Aligner<'a> {
    gold: &'a Graph,
    generated: &'a Graph,
    forward: BTreeMap<Term, Term>,
    used: BTreeSet<Term>,
    pairs: Vec<AlignedPair>,
}

impl Aligner<'_> {
    fn bind(&mut self, g: Term, n: Term, reason: AlignReason) {
        self.used.insert(n.clone());
        self.forward.insert(g.clone(), n.clone());
        self.pairs.push(AlignedPair {
            gold: g,
            generated: n,
            reason,
        });
    }

    fn greedy(&mut self, gold: Vec<Term>, cands: Vec<Term>, reason: AlignReason, name_weight: bool) {
        let gt = self.gold.type_map();
        let nt = self.generated.type_map();
        let mut scored = Vec::new();
        for g in &gold {
            for n in &cands {
                let j = jaccard(gt.get(g), nt.get(n));
                let s = if name_weight { name_similarity(g, n) } else { 0.0 };
                if j > 0.0 || s >= NAME_ONLY_THRESHOLD {
                    scored.push((j, s, g.clone(), n.clone()));
                }
            }
        }
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(b.1.total_cmp(&a.1))
                .then_with(|| a.2.cmp(&b.2))
                .then_with(|| a.3.cmp(&b.3))
        });
        for (_, _, g, n) in scored {
            if !self.forward.contains_key(&g) && !self.used.contains(&n) {
                self.bind(g, n, reason);
            }
        }
    }

    /// Follow (aligned subject, predicate) edges into blank nodes.
    fn blank_paths(&mut self) {
        let mut queue: VecDeque<(Term, Term)> = self.forward.iter().map(|(g, n)| (g.clone(), n.clone())).collect();
        while let Some((g, n)) = queue.pop_front() {
            let edges: Vec<Triple> = self.gold.about(&g).filter(|t| t.object.is_blank()).cloned().collect();
            for t in edges {
                if self.forward.contains_key(&t.object) {
                    continue;
                }
                let target = self
                    .generated
                    .objects(&n, &t.predicate.value)
                    .find(|o| o.is_blank() && !self.used.contains(*o))
                    .cloned();
                if let Some(b) = target {
                    self.bind(t.object.clone(), b.clone(), AlignReason::BlankPath);
                    queue.push_back((t.object, b));
                }
            }
        }
    }
}

pub fn align(gold: &Graph, generated: &Graph) -> Alignment {
    let mut a = Aligner {
        gold,
        generated,
        forward: BTreeMap::new(),
        used: BTreeSet::new(),
        pairs: Vec::new(),
    };
    let gold_subjects = subjects(gold);
    let gen_subjects = subjects(generated);

    for g in gold_subjects.iter().filter(|t| t.is_iri()) {
        if gen_subjects.contains(g) {
            a.bind(g.clone(), g.clone(), AlignReason::ExactIri);
        }
    }
    let open_gold: Vec<Term> = gold_subjects
        .iter()
        .filter(|t| t.is_iri() && !a.forward.contains_key(*t))
        .cloned()
        .collect();
    let open_gen: Vec<Term> = gen_subjects
        .iter()
        .filter(|t| t.is_iri() && !a.used.contains(*t) && !gold_subjects.contains(*t))
        .cloned()
        .collect();
    a.greedy(open_gold, open_gen, AlignReason::Similarity, true);
    a.blank_paths();

    let open_gold: Vec<Term> = gold_subjects
        .iter()
        .filter(|t| t.is_blank() && !a.forward.contains_key(*t))
        .cloned()
        .collect();
    if !open_gold.is_empty() {
        let open_gen: Vec<Term> = gen_subjects
            .iter()
            .filter(|t| t.is_blank() && !a.used.contains(*t))
            .cloned()
            .collect();
        a.greedy(open_gold, open_gen, AlignReason::BlankType, false);
        a.blank_paths();
    }

    let unmatched = gold_subjects
        .iter()
        .filter(|t| !a.forward.contains_key(*t))
        .cloned()
        .collect();
    let mut out = Alignment {
        pairs: a.pairs,
        unmatched,
        missing: Vec::new(),
    };
    out.missing = gold
        .iter()
        .filter(|t| !generated.contains(&out.translate(t)))
        .cloned()
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::parse_turtle;

    fn g(s: &str) -> Graph {
        parse_turtle(&format!("@prefix : <http://x/> .\n{s}"), None).unwrap()
    }

    #[test]
    fn identical_graphs_have_nothing_missing() {
        let gold = g(":c a :Cap ; :in :a . :a a :Info ; :de [ a :DE ; :td [ :name \"a\" ] ] .");
        let al = align(&gold, &gold.clone());
        assert!(al.missing.is_empty());
        assert!(al.unmatched.is_empty());
    }

    #[test]
    fn renamed_nodes_align_by_type_then_name() {
        let gold = g(":CheckParity a :Cap ; :in :a . :a a :Info .");
        let gen = g(":ParityCheck a :Cap ; :in :number . :number a :Info .");
        let al = align(&gold, &gen);
        assert_eq!(al.map(&Term::iri("http://x/CheckParity")), Some(&Term::iri("http://x/ParityCheck")));
        assert_eq!(al.map(&Term::iri("http://x/a")), Some(&Term::iri("http://x/number")));
        assert!(al.missing.is_empty());
    }

    #[test]
    fn deleted_triples_are_missing() {
        let gold = g(":c a :Cap ; :in :a ; :out :b . :a a :Info . :b a :Info .");
        let gen = g(":c a :Cap ; :in :a . :a a :Info . :b a :Info .");
        let al = align(&gold, &gen);
        assert_eq!(al.missing.len(), 1);
        assert_eq!(al.missing[0].predicate.value, "http://x/out");
    }

    #[test]
    fn blank_nodes_follow_paths() {
        let gold = g(":c :req [ :val 1 ; :unit :m ] .");
        let gen = g(":c :req [ :val 1 ] .");
        let al = align(&gold, &gen);
        assert_eq!(al.missing.len(), 1);
        assert_eq!(al.missing[0].predicate.value, "http://x/unit");
    }

    #[test]
    fn absent_node_counts_all_its_triples() {
        let gold = g(":c a :Cap ; :in :a . :a a :Info ; :label \"a\" .");
        let gen = g(":c a :Cap .");
        let al = align(&gold, &gen);
        assert_eq!(al.missing.len(), 3);
        assert_eq!(al.unmatched, vec![Term::iri("http://x/a")]);
    }
}
