//! Turtle writer. Subjects are grouped, blank nodes referenced once are inlined
//! as `[ ... ]` and well-formed lists as `( ... )`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use indexmap::IndexMap;

use super::graph::Graph;
use super::lexer::{is_pn_chars, is_pn_chars_base, is_pn_chars_u};
use super::term::{escape_string, Term, TermKind, Triple};
use super::vocab::*;

pub fn serialize_turtle(g: &Graph) -> String {
    Writer::new(g).write()
}

struct Writer<'a> {
    g: &'a Graph,
    /// namespace -> label, longest namespaces first when abbreviating
    ns: Vec<(String, String)>,
    used: BTreeSet<String>,
    by_subject: BTreeMap<&'a Term, Vec<&'a Triple>>,
    refs: BTreeMap<&'a Term, usize>,
    inline: BTreeSet<&'a Term>,
    lists: BTreeMap<&'a Term, Vec<&'a Term>>,
    list_members: BTreeSet<&'a Term>,
}

impl<'a> Writer<'a> {
    fn new(g: &'a Graph) -> Writer<'a> {
        let mut by_subject: BTreeMap<&Term, Vec<&Triple>> = BTreeMap::new();
        let mut refs: BTreeMap<&Term, usize> = BTreeMap::new();
        for t in g.iter() {
            by_subject.entry(&t.subject).or_default().push(t);
            if t.object.is_blank() {
                *refs.entry(&t.object).or_default() += 1;
            }
        }
        let mut w = Writer {
            g,
            ns: Vec::new(),
            used: BTreeSet::new(),
            by_subject,
            refs,
            inline: BTreeSet::new(),
            lists: BTreeMap::new(),
            list_members: BTreeSet::new(),
        };
        w.assign_prefixes();
        w.plan_blank_nodes();
        w
    }

    fn assign_prefixes(&mut self) {
        let mut table: IndexMap<String, String> = IndexMap::new();
        for (label, ns) in self.g.prefixes() {
            if !table.values().any(|v| v == ns) && !ns.is_empty() {
                table.insert(label.clone(), ns.clone());
            }
        }
        let mut iris: BTreeSet<&str> = BTreeSet::new();
        for t in self.g.iter() {
            for term in [&t.subject, &t.predicate, &t.object] {
                if term.is_iri() {
                    iris.insert(&term.value);
                }
                if let Some(dt) = &term.datatype {
                    iris.insert(dt);
                }
            }
        }
        let mut fresh = 0;
        for iri in iris {
            if table.values().any(|ns| abbreviates(ns, iri)) {
                continue;
            }
            let Some(ns) = namespace_of(iri) else { continue };
            if !valid_local(&iri[ns.len()..]) {
                continue;
            }
            let label = match WELL_KNOWN_PREFIXES.iter().find(|(_, n)| *n == ns) {
                Some((l, _)) if !table.contains_key(*l) => l.to_string(),
                _ => loop {
                    fresh += 1;
                    let l = format!("ns{fresh}");
                    if !table.contains_key(&l) {
                        break l;
                    }
                },
            };
            table.insert(label, ns.to_string());
        }
        let mut ns: Vec<(String, String)> = table.into_iter().map(|(l, n)| (n, l)).collect();
        ns.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        self.ns = ns;
    }

    fn plan_blank_nodes(&mut self) {
        // lists: chains of rdf:first/rdf:rest blank nodes, each referenced once
        let heads: Vec<&Term> = self
            .by_subject
            .keys()
            .copied()
            .filter(|s| s.is_blank() && self.refs.get(s) == Some(&1))
            .collect();
        for head in heads {
            if self.list_members.contains(head) {
                continue;
            }
            if let Some(items) = self.list_from(head) {
                // only treat as a list if nobody points at the head via rdf:rest
                let pointed_by_rest = self
                    .g
                    .iter()
                    .any(|t| &t.object == head && t.predicate.value == RDF_REST);
                if !pointed_by_rest {
                    self.lists.insert(head, items);
                }
            }
        }
        let lists: Vec<&Term> = self.lists.keys().copied().collect();
        for head in lists {
            let mut cur = head;
            while cur.is_blank() {
                self.list_members.insert(cur);
                cur = self.single(cur, RDF_REST).unwrap();
            }
        }

        let candidates: BTreeSet<&Term> = self
            .refs
            .iter()
            .filter(|(_, n)| **n == 1)
            .map(|(t, _)| *t)
            .collect();
        self.inline = candidates;
        // break pure blank node cycles by labelling their smallest member
        loop {
            let mut reached: BTreeSet<&Term> = BTreeSet::new();
            let roots: Vec<&Term> = self
                .by_subject
                .keys()
                .copied()
                .filter(|s| !self.inline.contains(s))
                .collect();
            let mut stack = roots;
            while let Some(n) = stack.pop() {
                for child in self.children(n) {
                    if self.inline.contains(child) && reached.insert(child) {
                        stack.push(child);
                    }
                }
            }
            let orphan = self
                .inline
                .iter()
                .copied()
                .find(|b| !reached.contains(b));
            match orphan {
                Some(b) => {
                    self.inline.remove(b);
                    if self.lists.remove(b).is_some() {
                        self.rebuild_list_members();
                    }
                }
                None => break,
            }
        }
    }

    fn rebuild_list_members(&mut self) {
        self.list_members.clear();
        let heads: Vec<&Term> = self.lists.keys().copied().collect();
        for head in heads {
            let mut cur = head;
            while cur.is_blank() {
                self.list_members.insert(cur);
                cur = self.single(cur, RDF_REST).unwrap();
            }
        }
    }

    fn children(&self, n: &'a Term) -> Vec<&'a Term> {
        let mut out = Vec::new();
        if let Some(ts) = self.by_subject.get(n) {
            for t in ts {
                if t.object.is_blank() {
                    out.push(&t.object);
                }
            }
        }
        out
    }

    fn single(&self, s: &Term, p: &str) -> Option<&'a Term> {
        let ts = self.by_subject.get(s)?;
        let mut it = ts.iter().filter(|t| t.predicate.value == p);
        let first = it.next()?;
        if it.next().is_some() {
            return None;
        }
        Some(&first.object)
    }

    /// Items of a well-formed list whose interior nodes carry only first/rest.
    fn list_from(&self, head: &'a Term) -> Option<Vec<&'a Term>> {
        let mut items = Vec::new();
        let mut cur = head;
        let mut seen = BTreeSet::new();
        loop {
            if cur.is_iri() && cur.value == RDF_NIL {
                return Some(items);
            }
            if !cur.is_blank() || !seen.insert(cur) {
                return None;
            }
            if cur != head && self.refs.get(cur) != Some(&1) {
                return None;
            }
            let ts = self.by_subject.get(cur)?;
            if ts.len() != 2 {
                return None;
            }
            items.push(self.single(cur, RDF_FIRST)?);
            cur = self.single(cur, RDF_REST)?;
        }
    }

    fn write(mut self) -> String {
        let mut body = String::new();
        let subjects: Vec<&Term> = self.by_subject.keys().copied().collect();
        let (iris, blanks): (Vec<&Term>, Vec<&Term>) =
            subjects.into_iter().partition(|s| s.is_iri());
        for s in iris.into_iter().chain(blanks) {
            if self.inline.contains(s) || self.list_members.contains(s) {
                continue;
            }
            let subj = self.term(s);
            let _ = write!(body, "{subj}");
            self.write_predicates(&mut body, s, 1);
            body.push_str(" .\n\n");
        }
        let mut out = String::new();
        let mut decls: Vec<(&String, &String)> = self
            .ns
            .iter()
            .filter(|(_, l)| self.used.contains(l))
            .map(|(n, l)| (l, n))
            .collect();
        decls.sort();
        for (l, n) in &decls {
            let _ = writeln!(out, "@prefix {l}: <{n}> .");
        }
        if !decls.is_empty() && !body.is_empty() {
            out.push('\n');
        }
        out.push_str(body.trim_end());
        if !body.is_empty() {
            out.push('\n');
        }
        out
    }

    fn write_predicates(&mut self, out: &mut String, s: &'a Term, depth: usize) {
        let ts = self.by_subject.get(s).cloned().unwrap_or_default();
        let mut grouped: Vec<(&Term, Vec<&Term>)> = Vec::new();
        let (types, rest): (Vec<&Triple>, Vec<&Triple>) =
            ts.into_iter().partition(|t| t.predicate.value == RDF_TYPE);
        for t in types.into_iter().chain(rest) {
            match grouped.last_mut() {
                Some((p, objs)) if *p == &t.predicate => objs.push(&t.object),
                _ => grouped.push((&t.predicate, vec![&t.object])),
            }
        }
        let indent = "    ".repeat(depth);
        for (i, (p, objs)) in grouped.iter().enumerate() {
            if i == 0 {
                out.push(' ');
            } else {
                out.push_str(" ;\n");
                out.push_str(&indent);
            }
            let pred = if p.value == RDF_TYPE {
                "a".to_string()
            } else {
                self.term(p)
            };
            out.push_str(&pred);
            out.push(' ');
            for (j, o) in objs.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                self.write_object(out, o, depth);
            }
        }
    }

    fn write_object(&mut self, out: &mut String, o: &'a Term, depth: usize) {
        if let Some(items) = self.lists.get(o).cloned() {
            if self.inline.contains(o) {
                out.push('(');
                for item in items {
                    out.push(' ');
                    self.write_object(out, item, depth + 1);
                }
                out.push_str(" )");
                return;
            }
        }
        if self.inline.contains(o) {
            if self.by_subject.contains_key(o) {
                out.push('[');
                self.write_predicates(out, o, depth + 1);
                out.push_str(" ]");
            } else {
                out.push_str("[]");
            }
            return;
        }
        let t = self.term(o);
        out.push_str(&t);
    }

    fn term(&mut self, t: &Term) -> String {
        match t.kind {
            TermKind::Iri => self.iri(&t.value),
            TermKind::BlankNode => format!("_:{}", blank_label(&t.value)),
            TermKind::Literal => self.literal(t),
        }
    }

    fn iri(&mut self, iri: &str) -> String {
        if iri == RDF_NIL {
            return "()".to_string();
        }
        for (ns, label) in &self.ns {
            if abbreviates(ns, iri) {
                self.used.insert(label.clone());
                return format!("{label}:{}", &iri[ns.len()..]);
            }
        }
        format!("<{}>", escape_iri(iri))
    }

    fn literal(&mut self, t: &Term) -> String {
        let quoted = format!("\"{}\"", escape_string(&t.value));
        if let Some(lang) = &t.language {
            return format!("{quoted}@{lang}");
        }
        match t.datatype.as_deref() {
            None | Some(XSD_STRING) => quoted,
            Some(XSD_INTEGER) if is_integer_lexical(&t.value) => t.value.clone(),
            Some(XSD_DECIMAL) if is_decimal_lexical(&t.value) => t.value.clone(),
            Some(XSD_DOUBLE) if is_double_lexical(&t.value) => t.value.clone(),
            Some(XSD_BOOLEAN) if t.value == "true" || t.value == "false" => t.value.clone(),
            Some(dt) => {
                let dt = self.iri(dt);
                format!("{quoted}^^{dt}")
            }
        }
    }
}

fn abbreviates(ns: &str, iri: &str) -> bool {
    iri.len() > ns.len() && iri.starts_with(ns) && valid_local(&iri[ns.len()..])
}

fn namespace_of(iri: &str) -> Option<&str> {
    let i = iri.rfind(['#', '/'])?;
    if i + 1 >= iri.len() {
        return None;
    }
    Some(&iri[..=i])
}

/// Local names the writer emits without escapes.
fn valid_local(local: &str) -> bool {
    let mut chars = local.chars().peekable();
    let Some(first) = chars.next() else { return false };
    if !(is_pn_chars_u(first) || first.is_ascii_digit()) {
        return false;
    }
    let rest: Vec<char> = chars.collect();
    if rest.last() == Some(&'.') {
        return false;
    }
    rest.iter().all(|c| is_pn_chars(*c) || *c == '.')
}

fn blank_label(id: &str) -> String {
    let ok = id.chars().next().is_some_and(|c| is_pn_chars_base(c) || c == '_' || c.is_ascii_digit())
        && id.chars().all(is_pn_chars)
        && !id.is_empty();
    if ok {
        id.to_string()
    } else {
        id.chars()
            .map(|c| if is_pn_chars(c) { c } else { '_' })
            .collect::<String>()
            + "_"
    }
}

fn escape_iri(iri: &str) -> String {
    let mut out = String::with_capacity(iri.len());
    for c in iri.chars() {
        if c <= ' ' || "<>\"{}|^`\\".contains(c) {
            let _ = write!(out, "\\u{:04X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}

fn is_integer_lexical(v: &str) -> bool {
    let d = v.strip_prefix(['+', '-']).unwrap_or(v);
    !d.is_empty() && d.chars().all(|c| c.is_ascii_digit())
}

fn is_decimal_lexical(v: &str) -> bool {
    let d = v.strip_prefix(['+', '-']).unwrap_or(v);
    match d.split_once('.') {
        Some((a, b)) => a.chars().all(|c| c.is_ascii_digit()) && !b.is_empty() && b.chars().all(|c| c.is_ascii_digit()),
        None => false,
    }
}

fn is_double_lexical(v: &str) -> bool {
    let Some(i) = v.find(['e', 'E']) else { return false };
    let (m, e) = (&v[..i], &v[i + 1..]);
    let e = e.strip_prefix(['+', '-']).unwrap_or(e);
    (is_integer_lexical(m) || is_decimal_lexical(m)) && !e.is_empty() && e.chars().all(|c| c.is_ascii_digit())
}
