//! RDF terms, graphs, Turtle parsing/serialization and isomorphism.

mod graph;
mod iso;
mod lexer;
mod parser;
mod serializer;
mod term;
pub mod vocab;

pub use graph::{count_triples, Graph};
pub use iso::{graph_isomorphic, graph_isomorphic_with_budget, IsoError, DEFAULT_BUDGET};
pub use parser::{
    parse_lenient, parse_turtle, IssueCategory, ParseOutcome, StatementSpan, SyntaxIssue,
};
pub use serializer::serialize_turtle;
pub use term::{local_name, Term, TermKind, Triple};
