//! Blank-node isomorphism: colour refinement to partition blank nodes, then a
//! budgeted backtracking search inside colour classes.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use thiserror::Error;

use super::graph::Graph;
use super::term::{Term, Triple};

/// Candidate mappings tried before giving up.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsoError {
    #[error("blank node search exceeded its budget of {0} candidate mappings")]
    BudgetExceeded(u64),
}

pub fn graph_isomorphic(a: &Graph, b: &Graph) -> Result<bool, IsoError> {
    graph_isomorphic_with_budget(a, b, DEFAULT_BUDGET)
}

pub fn graph_isomorphic_with_budget(a: &Graph, b: &Graph, budget: u64) -> Result<bool, IsoError> {
    if a.len() != b.len() {
        return Ok(false);
    }
    let ground_a: BTreeSet<&Triple> = a.iter().filter(|t| !t.has_blank()).collect();
    let ground_b: BTreeSet<&Triple> = b.iter().filter(|t| !t.has_blank()).collect();
    if ground_a != ground_b {
        return Ok(false);
    }
    let blank_a: Vec<&Triple> = a.iter().filter(|t| t.has_blank()).collect();
    let blank_b: Vec<&Triple> = b.iter().filter(|t| t.has_blank()).collect();
    if blank_a.is_empty() {
        return Ok(true);
    }
    let colours_a = refine(&blank_a);
    let colours_b = refine(&blank_b);
    let hist = |c: &HashMap<&Term, u64>| {
        let mut h: BTreeMap<u64, usize> = BTreeMap::new();
        for v in c.values() {
            *h.entry(*v).or_default() += 1;
        }
        h
    };
    if hist(&colours_a) != hist(&colours_b) {
        return Ok(false);
    }

    let set_b: BTreeSet<&Triple> = blank_b.iter().copied().collect();
    let mut by_node: HashMap<&Term, Vec<&Triple>> = HashMap::new();
    for t in &blank_a {
        if t.subject.is_blank() {
            by_node.entry(&t.subject).or_default().push(t);
        }
        if t.object.is_blank() && t.object != t.subject {
            by_node.entry(&t.object).or_default().push(t);
        }
    }
    let mut class_b: HashMap<u64, Vec<&Term>> = HashMap::new();
    for (n, c) in &colours_b {
        class_b.entry(*c).or_default().push(n);
    }
    for v in class_b.values_mut() {
        v.sort();
    }

    // small classes first, then follow connectivity so that constraints bite early
    let mut order: Vec<&Term> = colours_a.keys().copied().collect();
    order.sort_by_key(|n| (class_b[&colours_a[n]].len(), (*n).clone()));
    let order = connectivity_order(order, &by_node);

    let mut search = Search {
        order,
        colours_a: &colours_a,
        class_b: &class_b,
        by_node: &by_node,
        set_b: &set_b,
        mapping: HashMap::new(),
        used: BTreeSet::new(),
        tried: 0,
        budget,
    };
    search.run(0)
}

fn connectivity_order<'a>(seed: Vec<&'a Term>, by_node: &HashMap<&'a Term, Vec<&'a Triple>>) -> Vec<&'a Term> {
    let mut out = Vec::with_capacity(seed.len());
    let mut placed: BTreeSet<&Term> = BTreeSet::new();
    for start in &seed {
        if placed.contains(start) {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([*start]);
        placed.insert(start);
        while let Some(n) = queue.pop_front() {
            out.push(n);
            for t in by_node.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                for m in [&t.subject, &t.object] {
                    if m.is_blank() && !placed.contains(m) {
                        placed.insert(m);
                        queue.push_back(m);
                    }
                }
            }
        }
    }
    out
}

fn hash_of<T: Hash>(v: &T) -> u64 {
    let mut h = DefaultHasher::new();
    v.hash(&mut h);
    h.finish()
}

/// Iterated neighbourhood hashing until the number of classes stops growing.
fn refine<'a>(triples: &[&'a Triple]) -> HashMap<&'a Term, u64> {
    let mut colour: HashMap<&Term, u64> = HashMap::new();
    for t in triples {
        for n in [&t.subject, &t.object] {
            if n.is_blank() {
                colour.insert(n, 0);
            }
        }
    }
    let mut classes = 1;
    for _ in 0..=colour.len() {
        let mut sigs: HashMap<&Term, Vec<u64>> = HashMap::new();
        for t in triples {
            let p = &t.predicate.value;
            if t.subject.is_blank() {
                let other = if t.object.is_blank() {
                    if t.object == t.subject {
                        hash_of(&("self", 0u64))
                    } else {
                        hash_of(&("b", colour[&t.object]))
                    }
                } else {
                    hash_of(&("g", &t.object))
                };
                sigs.entry(&t.subject).or_default().push(hash_of(&("out", p, other)));
            }
            if t.object.is_blank() && t.object != t.subject {
                let other = if t.subject.is_blank() {
                    hash_of(&("b", colour[&t.subject]))
                } else {
                    hash_of(&("g", &t.subject))
                };
                sigs.entry(&t.object).or_default().push(hash_of(&("in", p, other)));
            }
        }
        let mut next: HashMap<&Term, u64> = HashMap::new();
        for (n, mut s) in sigs {
            s.sort_unstable();
            next.insert(n, hash_of(&(colour[n], s)));
        }
        let count = next.values().collect::<BTreeSet<_>>().len();
        colour = next;
        if count == classes {
            break;
        }
        classes = count;
    }
    colour
}

struct Search<'s, 'a> {
    order: Vec<&'a Term>,
    colours_a: &'s HashMap<&'a Term, u64>,
    class_b: &'s HashMap<u64, Vec<&'a Term>>,
    by_node: &'s HashMap<&'a Term, Vec<&'a Triple>>,
    set_b: &'s BTreeSet<&'a Triple>,
    mapping: HashMap<&'a Term, &'a Term>,
    used: BTreeSet<&'a Term>,
    tried: u64,
    budget: u64,
}

impl<'a> Search<'_, 'a> {
    fn run(&mut self, depth: usize) -> Result<bool, IsoError> {
        if depth == self.order.len() {
            return Ok(true);
        }
        let n = self.order[depth];
        let candidates = self.class_b[&self.colours_a[n]].clone();
        for c in candidates {
            if self.used.contains(c) {
                continue;
            }
            self.tried += 1;
            if self.tried > self.budget {
                return Err(IsoError::BudgetExceeded(self.budget));
            }
            self.mapping.insert(n, c);
            if self.consistent(n) {
                self.used.insert(c);
                if self.run(depth + 1)? {
                    return Ok(true);
                }
                self.used.remove(c);
            }
            self.mapping.remove(n);
        }
        Ok(false)
    }

    /// Every triple touching `n` whose blank nodes are all mapped must exist in b.
    fn consistent(&self, n: &Term) -> bool {
        let map = |t: &'a Term| -> Option<Term> {
            if t.is_blank() {
                self.mapping.get(t).map(|m| (*m).clone())
            } else {
                Some(t.clone())
            }
        };
        for t in self.by_node.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            let (Some(s), Some(o)) = (map(&t.subject), map(&t.object)) else {
                continue;
            };
            let mapped = Triple::new(s, t.predicate.clone(), o);
            if !self.set_b.contains(&mapped) {
                return false;
            }
        }
        true
    }
}
