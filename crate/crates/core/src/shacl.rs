//! SHACL subset: node shapes with class targets, closed shapes, and property
//! shapes with single-predicate paths and count/class/datatype/node-kind checks.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::vocab::{RDF_LANG_STRING, RDF_TYPE, SH};
use crate::rdf::{Graph, Term, TermKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "IRI")]
    Iri,
    BlankNode,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyConstraint {
    pub path: String,
    pub min_count: Option<u64>,
    pub max_count: Option<u64>,
    pub class: Option<String>,
    pub datatype: Option<String>,
    pub node_kind: Option<NodeKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeShape {
    pub id: String,
    pub target_classes: BTreeSet<String>,
    pub closed: bool,
    pub ignored_properties: BTreeSet<String>,
    pub constraints: Vec<PropertyConstraint>,
}

impl NodeShape {
    /// Predicates a closed shape admits.
    pub fn allowed_predicates(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.constraints.iter().map(|c| c.path.clone()).collect();
        out.extend(self.ignored_properties.iter().cloned());
        out.insert(RDF_TYPE.to_string());
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ShapeSet {
    pub shapes: Vec<NodeShape>,
}

impl ShapeSet {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShaclError {
    #[error("shape {shape}: property shape without sh:path")]
    MissingPath { shape: String },
    #[error("shape {shape}: {what} must be a non-negative integer, got {value}")]
    BadCount {
        shape: String,
        what: &'static str,
        value: String,
    },
    #[error("shape {shape}: sh:minCount {min} exceeds sh:maxCount {max} on {path}")]
    MinExceedsMax {
        shape: String,
        path: String,
        min: u64,
        max: u64,
    },
    #[error("shape {shape}: sh:ignoredProperties is not a well-formed list")]
    BadIgnoredList { shape: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadWarning {
    pub shape: String,
    pub message: String,
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.shape, self.message)
    }
}

fn sh(local: &str) -> String {
    format!("{SH}{local}")
}

/// Non-validating SHACL terms that are skipped without a warning.
const INFORMATIONAL: &[&str] = &["name", "description", "message", "severity", "order", "group", "deactivated"];

fn shape_id(t: &Term) -> String {
    match t.kind {
        TermKind::BlankNode => format!("_:{}", t.value),
        _ => t.value.clone(),
    }
}

pub fn load_shapes(g: &Graph) -> Result<(ShapeSet, Vec<LoadWarning>), ShaclError> {
    let mut warnings = Vec::new();
    let mut shapes = Vec::new();
    let node_shape = sh("NodeShape");
    let mut nodes: Vec<&Term> = g.subjects_of_type(&node_shape).collect();
    nodes.sort();
    nodes.dedup();
    for node in nodes {
        let id = shape_id(node);
        let mut warn = |m: String| {
            warnings.push(LoadWarning {
                shape: id.clone(),
                message: m,
            })
        };
        let mut shape = NodeShape {
            id: id.clone(),
            target_classes: BTreeSet::new(),
            closed: false,
            ignored_properties: BTreeSet::new(),
            constraints: Vec::new(),
        };
        let mut property_nodes = Vec::new();
        for t in g.about(node) {
            let p = t.predicate.value.as_str();
            let Some(local) = p.strip_prefix(SH) else { continue };
            match local {
                "targetClass" if t.object.is_iri() => {
                    shape.target_classes.insert(t.object.value.clone());
                }
                "closed" => shape.closed = t.object.value == "true",
                "ignoredProperties" => {
                    let items = g
                        .list_items(&t.object)
                        .ok_or_else(|| ShaclError::BadIgnoredList { shape: id.clone() })?;
                    shape
                        .ignored_properties
                        .extend(items.into_iter().filter(|i| i.is_iri()).map(|i| i.value));
                }
                "property" => property_nodes.push(t.object.clone()),
                l if INFORMATIONAL.contains(&l) => {}
                other => warn(format!("unsupported construct sh:{other} ignored")),
            }
        }
        for pnode in property_nodes {
            if let Some(c) = load_property(g, &pnode, &id, &mut warn)? {
                shape.constraints.push(c);
            }
        }
        if shape.target_classes.is_empty() {
            warn("no sh:targetClass; shape skipped".into());
            continue;
        }
        shapes.push(shape);
    }
    for t in g.with_predicate(&sh("targetClass")) {
        if !g.subjects_of_type(&node_shape).any(|s| s == &t.subject) {
            warnings.push(LoadWarning {
                shape: shape_id(&t.subject),
                message: "sh:targetClass on a node not typed sh:NodeShape; ignored".into(),
            });
        }
    }
    Ok((ShapeSet { shapes }, warnings))
}

fn count_value(t: &Term, shape: &str, what: &'static str) -> Result<u64, ShaclError> {
    t.value.trim().parse::<u64>().map_err(|_| ShaclError::BadCount {
        shape: shape.to_string(),
        what,
        value: t.value.clone(),
    })
}

fn load_property(
    g: &Graph,
    node: &Term,
    shape: &str,
    warn: &mut impl FnMut(String),
) -> Result<Option<PropertyConstraint>, ShaclError> {
    let mut path: Option<&Term> = None;
    let mut c = PropertyConstraint {
        path: String::new(),
        min_count: None,
        max_count: None,
        class: None,
        datatype: None,
        node_kind: None,
    };
    for t in g.about(node) {
        let p = t.predicate.value.as_str();
        let Some(local) = p.strip_prefix(SH) else { continue };
        match local {
            "path" => path = Some(&t.object),
            "minCount" => c.min_count = Some(count_value(&t.object, shape, "sh:minCount")?),
            "maxCount" => c.max_count = Some(count_value(&t.object, shape, "sh:maxCount")?),
            "class" if c.class.is_none() => c.class = Some(t.object.value.clone()),
            "datatype" if c.datatype.is_none() => c.datatype = Some(t.object.value.clone()),
            "nodeKind" => match t.object.value.strip_prefix(SH) {
                Some("IRI") => c.node_kind = Some(NodeKind::Iri),
                Some("BlankNode") => c.node_kind = Some(NodeKind::BlankNode),
                Some("Literal") => c.node_kind = Some(NodeKind::Literal),
                _ => warn(format!("unsupported sh:nodeKind {}", t.object)),
            },
            "class" | "datatype" => warn(format!("only the first sh:{local} of a property shape is used")),
            l if INFORMATIONAL.contains(&l) => {}
            other => warn(format!("unsupported constraint sh:{other} ignored")),
        }
    }
    let Some(path) = path else {
        return Err(ShaclError::MissingPath {
            shape: shape.to_string(),
        });
    };
    if !path.is_iri() {
        warn("property path other than a single predicate; constraint skipped".into());
        return Ok(None);
    }
    c.path = path.value.clone();
    if let (Some(min), Some(max)) = (c.min_count, c.max_count) {
        if min > max {
            return Err(ShaclError::MinExceedsMax {
                shape: shape.to_string(),
                path: c.path,
                min,
                max,
            });
        }
    }
    Ok(Some(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Closed,
    MinCount,
    MaxCount,
    Class,
    Datatype,
    NodeKind,
}

impl ViolationKind {
    pub fn is_hallucination(self) -> bool {
        !matches!(self, ViolationKind::MinCount)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub focus_node: Term,
    pub shape_id: String,
    pub kind: ViolationKind,
    pub path: Option<String>,
    pub value: Option<Term>,
    pub message: String,
}

/// Validate a data graph whose rdf:type triples already include inferred types.
pub fn validate(data: &Graph, shapes: &ShapeSet) -> Vec<Violation> {
    let mut out = Vec::new();
    for shape in &shapes.shapes {
        let mut focus: BTreeSet<&Term> = BTreeSet::new();
        for c in &shape.target_classes {
            focus.extend(data.subjects_of_type(c));
        }
        let allowed = shape.allowed_predicates();
        for node in focus {
            for c in &shape.constraints {
                check_property(data, shape, node, c, &mut out);
            }
            if shape.closed {
                for t in data.about(node) {
                    if !allowed.contains(&t.predicate.value) {
                        out.push(Violation {
                            focus_node: node.clone(),
                            shape_id: shape.id.clone(),
                            kind: ViolationKind::Closed,
                            path: Some(t.predicate.value.clone()),
                            value: Some(t.object.clone()),
                            message: format!(
                                "predicate <{}> is not allowed by closed shape",
                                t.predicate.value
                            ),
                        });
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        (&a.focus_node, &a.shape_id, a.kind, &a.path, &a.value)
            .cmp(&(&b.focus_node, &b.shape_id, b.kind, &b.path, &b.value))
    });
    out
}

fn check_property(data: &Graph, shape: &NodeShape, node: &Term, c: &PropertyConstraint, out: &mut Vec<Violation>) {
    let values: Vec<&Term> = data.objects(node, &c.path).collect();
    let mut push = |kind, value: Option<Term>, message: String| {
        out.push(Violation {
            focus_node: node.clone(),
            shape_id: shape.id.clone(),
            kind,
            path: Some(c.path.clone()),
            value,
            message,
        })
    };
    let n = values.len() as u64;
    if let Some(min) = c.min_count {
        if n < min {
            push(
                ViolationKind::MinCount,
                None,
                format!("expected at least {min} value(s) for <{}>, found {n}", c.path),
            );
        }
    }
    if let Some(max) = c.max_count {
        if n > max {
            push(
                ViolationKind::MaxCount,
                None,
                format!("expected at most {max} value(s) for <{}>, found {n}", c.path),
            );
        }
    }
    for v in values {
        if let Some(class) = &c.class {
            let typed = !v.is_literal()
                && data
                    .objects(v, RDF_TYPE)
                    .any(|t| t.is_iri() && &t.value == class);
            if !typed {
                push(
                    ViolationKind::Class,
                    Some(v.clone()),
                    format!("value is not an instance of <{class}>"),
                );
            }
        }
        if let Some(dt) = &c.datatype {
            let ok = v.is_literal() && v.datatype.as_deref().unwrap_or(RDF_LANG_STRING) == dt;
            if !ok {
                push(
                    ViolationKind::Datatype,
                    Some(v.clone()),
                    format!("value does not have datatype <{dt}>"),
                );
            }
        }
        if let Some(kind) = c.node_kind {
            let ok = match kind {
                NodeKind::Iri => v.is_iri(),
                NodeKind::BlankNode => v.is_blank(),
                NodeKind::Literal => v.is_literal(),
            };
            if !ok {
                push(
                    ViolationKind::NodeKind,
                    Some(v.clone()),
                    format!("value is not of node kind {kind:?}"),
                );
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub hallucinated: usize,
    pub incomplete: usize,
}

pub fn classify(violations: &[Violation]) -> Classification {
    let mut c = Classification::default();
    for v in violations {
        if v.kind.is_hallucination() {
            c.hallucinated += 1;
        } else {
            c.incomplete += 1;
        }
    }
    c
}
