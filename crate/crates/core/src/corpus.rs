//! Loading the study corpus described by `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::consistency::{index_tbox, TBoxIndex};
use crate::prompt::{CapabilitySpec, ExampleSpec, PromptError, PromptTemplate, Technique};
use crate::rdf::{parse_turtle, Graph, SyntaxIssue};
use crate::shacl::{load_shapes, LoadWarning, ShaclError, ShapeSet};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("{path} does not parse ({} issue(s), first: {})", issues.len(), issues[0])]
    Syntax { path: PathBuf, issues: Vec<SyntaxIssue> },
    #[error(transparent)]
    Shapes(#[from] ShaclError),
    #[error("{path}: {source}")]
    Template {
        path: PathBuf,
        #[source]
        source: PromptError,
    },
    #[error("duplicate id {0} in manifest")]
    DuplicateId(String),
}

#[derive(Debug, Deserialize)]
struct Manifest {
    tbox_path: PathBuf,
    tbox_iri: String,
    shapes_path: PathBuf,
    templates: BTreeMap<String, PathBuf>,
    examples: Vec<ManifestEntry>,
    capabilities: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    id: String,
    name: String,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    outputs: Vec<String>,
    #[serde(default)]
    constraints: Vec<String>,
    description_path: PathBuf,
    #[serde(default)]
    solution_path: Option<PathBuf>,
    #[serde(default)]
    gold_path: Option<PathBuf>,
}

/// Everything a study needs from disk, parsed once and shared read-only.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub tbox_iri: String,
    pub tbox_text: String,
    pub tbox: Graph,
    pub index: TBoxIndex,
    pub shapes: ShapeSet,
    pub shape_warnings: Vec<LoadWarning>,
    /// zero, one, few
    pub templates: Vec<PromptTemplate>,
    pub examples: Vec<ExampleSpec>,
    pub capabilities: Vec<CapabilitySpec>,
    pub golds: BTreeMap<String, Graph>,
    /// sha256 over the manifest and every file it references
    pub hash: String,
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Corpus, CorpusError> {
        let mut hasher = Sha256::new();
        let mut read = |rel: &Path| -> Result<String, CorpusError> {
            let path = root.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
                path: path.clone(),
                source,
            })?;
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(text.as_bytes());
            Ok(text)
        };
        let manifest_text = read(Path::new("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)?;
        let parse = |path: &Path, text: &str| {
            parse_turtle(text, None).map_err(|issues| CorpusError::Syntax {
                path: path.to_path_buf(),
                issues,
            })
        };

        let tbox_text = read(&manifest.tbox_path)?;
        let tbox = parse(&manifest.tbox_path, &tbox_text)?;
        let shapes_text = read(&manifest.shapes_path)?;
        let (shapes, shape_warnings) = load_shapes(&parse(&manifest.shapes_path, &shapes_text)?)?;

        let mut templates = Vec::new();
        for technique in Technique::ALL {
            let Some(rel) = manifest.templates.get(technique.key()) else { continue };
            let text = read(rel)?;
            let t = PromptTemplate::parse(&text).map_err(|source| CorpusError::Template {
                path: rel.clone(),
                source,
            })?;
            templates.push(t);
        }

        let mut seen = std::collections::BTreeSet::new();
        let mut examples = Vec::new();
        for e in &manifest.examples {
            if !seen.insert(e.id.clone()) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
            let description = read(&e.description_path)?;
            let solution = match &e.solution_path {
                Some(p) => read(p)?,
                None => String::new(),
            };
            examples.push(ExampleSpec {
                id: e.id.clone(),
                name: e.name.clone(),
                description,
                solution,
            });
        }
        let mut capabilities = Vec::new();
        let mut golds = BTreeMap::new();
        for c in &manifest.capabilities {
            if !seen.insert(c.id.clone()) {
                return Err(CorpusError::DuplicateId(c.id.clone()));
            }
            let description = read(&c.description_path)?;
            let gold_path = c.gold_path.clone().unwrap_or_default();
            let gold_text = read(&gold_path)?;
            golds.insert(c.id.clone(), parse(&gold_path, &gold_text)?);
            capabilities.push(CapabilitySpec {
                id: c.id.clone(),
                name: c.name.clone(),
                description,
                inputs: c.inputs.clone(),
                outputs: c.outputs.clone(),
                constraints: c.constraints.clone(),
                gold_path: root.join(gold_path),
                description_path: root.join(&c.description_path),
            });
        }

        let index = index_tbox(&tbox);
        Ok(Corpus {
            root: root.to_path_buf(),
            tbox_iri: manifest.tbox_iri,
            tbox_text,
            tbox,
            index,
            shapes,
            shape_warnings,
            templates,
            examples,
            capabilities,
            golds,
            hash: hex::encode(hasher.finalize()),
        })
    }

    pub fn capability(&self, id: &str) -> Option<&CapabilitySpec> {
        self.capabilities.iter().find(|c| c.id == id)
    }

    pub fn template(&self, technique: Technique) -> Option<&PromptTemplate> {
        self.templates.iter().find(|t| t.technique == technique)
    }

    pub fn gold(&self, id: &str) -> Option<&Graph> {
        self.golds.get(id)
    }
}
