//! Independent isomorphism oracle: plain search over blank-node bijections.
//! No hashing or refinement; small inputs enumerate every permutation.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ontogen::rdf::{Graph, Term, Triple};

fn blanks(g: &Graph) -> Vec<Term> {
    let mut out = BTreeSet::new();
    for t in g.iter() {
        for n in [&t.subject, &t.object] {
            if n.is_blank() {
                out.insert(n.clone());
            }
        }
    }
    out.into_iter().collect()
}

fn apply(t: &Triple, m: &BTreeMap<Term, Term>) -> Option<Triple> {
    let f = |x: &Term| {
        if x.is_blank() {
            m.get(x).cloned()
        } else {
            Some(x.clone())
        }
    };
    Some(Triple::new(f(&t.subject)?, t.predicate.clone(), f(&t.object)?))
}

pub fn brute_force_isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let ba = blanks(a);
    let bb = blanks(b);
    if ba.len() != bb.len() {
        return false;
    }
    let target: BTreeSet<Triple> = b.iter().cloned().collect();
    if ba.len() <= 7 {
        let mut perm: Vec<usize> = (0..bb.len()).collect();
        return permutations(&mut perm, 0, &mut |p| {
            let m: BTreeMap<Term, Term> = ba.iter().cloned().zip(p.iter().map(|i| bb[*i].clone())).collect();
            a.iter().all(|t| apply(t, &m).is_some_and(|x| target.contains(&x)))
        });
    }
    let mut m = BTreeMap::new();
    let mut used = BTreeSet::new();
    extend(a, &target, &ba, &bb, 0, &mut m, &mut used)
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    if k == p.len() {
        return f(p);
    }
    for i in k..p.len() {
        p.swap(k, i);
        if permutations(p, k + 1, f) {
            return true;
        }
        p.swap(k, i);
    }
    false
}

fn extend(
    a: &Graph,
    target: &BTreeSet<Triple>,
    ba: &[Term],
    bb: &[Term],
    k: usize,
    m: &mut BTreeMap<Term, Term>,
    used: &mut BTreeSet<Term>,
) -> bool {
    if k == ba.len() {
        return a.iter().all(|t| apply(t, m).is_some_and(|x| target.contains(&x)));
    }
    for c in bb {
        if used.contains(c) {
            continue;
        }
        m.insert(ba[k].clone(), c.clone());
        // prune: every triple whose blank nodes are all mapped must be present
        let ok = a.iter().all(|t| match apply(t, m) {
            Some(x) => target.contains(&x),
            None => true,
        });
        if ok {
            used.insert(c.clone());
            if extend(a, target, ba, bb, k + 1, m, used) {
                return true;
            }
            used.remove(c);
        }
        m.remove(&ba[k]);
    }
    false
}
