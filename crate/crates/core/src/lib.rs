pub mod config;
pub mod consistency;
pub mod corpus;
pub mod faults;
pub mod llm;
pub mod pipeline;
pub mod prompt;
pub mod rdf;
pub mod report;
pub mod scoring;
pub mod shacl;
