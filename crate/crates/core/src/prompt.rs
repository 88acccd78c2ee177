//! Prompt templates, rendering and the study prompt matrix.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opens every example block in a rendered prompt.
pub const EXAMPLE_BEGIN: &str = "--- BEGIN EXAMPLE";
pub const EXAMPLE_END: &str = "--- END EXAMPLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Zero,
    One,
    Few,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::Zero, Technique::One, Technique::Few];

    /// Short key used in file names and experiment keys.
    pub fn key(self) -> &'static str {
        match self {
            Technique::Zero => "zero",
            Technique::One => "one",
            Technique::Few => "few",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Technique::Zero => "zero-shot",
            Technique::One => "one-shot",
            Technique::Few => "few-shot",
        }
    }

    pub fn example_count(self) -> usize {
        match self {
            Technique::Zero => 0,
            Technique::One => 1,
            Technique::Few => 3,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Technique {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "zero-shot" | "zeroshot" => Ok(Technique::Zero),
            "one" | "one-shot" | "oneshot" => Ok(Technique::One),
            "few" | "few-shot" | "fewshot" => Ok(Technique::Few),
            other => Err(PromptError::UnknownTechnique(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompting technique {0:?}")]
    UnknownTechnique(String),
    #[error("template: {0}")]
    Template(String),
    #[error("{technique} template expects {expected} example(s), got {got}")]
    Arity {
        technique: Technique,
        expected: usize,
        got: usize,
    },
    #[error("unknown example id {0}")]
    UnknownExample(String),
    #[error("{0} is a prompt example and cannot be a study target")]
    ExampleAsTarget(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilitySpec {
    pub id: String,
    pub name: String,
    pub description: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub constraints: Vec<String>,
    pub gold_path: PathBuf,
    pub description_path: PathBuf,
}

impl CapabilitySpec {
    pub fn is_target(&self) -> bool {
        self.id.starts_with('C')
    }
}

/// A worked example shown to the model: task description plus solution ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub id: String,
    pub name: String,
    pub description: String,
    pub solution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub technique: Technique,
    pub instruction: String,
    pub example_ids: Vec<String>,
    pub body: String,
}

impl PromptTemplate {
    /// Template files are a `key: value` header, a `---` line, then the body.
    pub fn parse(text: &str) -> Result<PromptTemplate, PromptError> {
        let mut technique = None;
        let mut example_ids = Vec::new();
        let mut lines = text.split_inclusive('\n');
        let mut consumed = 0;
        let mut found_separator = false;
        for line in lines.by_ref() {
            consumed += line.len();
            let l = line.trim();
            if l == "---" {
                found_separator = true;
                break;
            }
            if l.is_empty() {
                continue;
            }
            let (key, value) = l
                .split_once(':')
                .ok_or_else(|| PromptError::Template(format!("bad header line {l:?}")))?;
            match key.trim() {
                "technique" => technique = Some(value.parse::<Technique>()?),
                "examples" => {
                    example_ids = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                other => return Err(PromptError::Template(format!("unknown header key {other:?}"))),
            }
        }
        if !found_separator {
            return Err(PromptError::Template("missing '---' after header".into()));
        }
        let technique = technique.ok_or_else(|| PromptError::Template("missing technique".into()))?;
        if example_ids.len() != technique.example_count() {
            return Err(PromptError::Arity {
                technique,
                expected: technique.example_count(),
                got: example_ids.len(),
            });
        }
        let body = text[consumed..].to_string();
        for marker in ["{CONTEXT}", "{EXAMPLES}", "{TASK}"] {
            if !body.contains(marker) {
                return Err(PromptError::Template(format!("body lacks {marker}")));
            }
        }
        let instruction = body
            .trim_start()
            .split("\n\n")
            .next()
            .unwrap_or_default()
            .trim()
            .to_string();
        Ok(PromptTemplate {
            technique,
            instruction,
            example_ids,
            body,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub capability_id: String,
    pub technique: Technique,
    pub rendered_text: String,
    pub token_estimate: usize,
}

/// ceil(chars / 4)
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn example_block(n: usize, description: &str, solution: &str) -> String {
    format!(
        "{EXAMPLE_BEGIN} {n} ---\nTask description:\n{}\n\nSolution:\n{}\n{EXAMPLE_END} {n} ---\n\n",
        description.trim_end(),
        solution.trim_end()
    )
}

pub fn count_example_blocks(rendered: &str) -> usize {
    rendered
        .lines()
        .filter(|l| l.starts_with(EXAMPLE_BEGIN))
        .count()
}

/// Fill `{CONTEXT}`, `{EXAMPLES}` and `{TASK}` in one left-to-right pass, so text
/// inserted for one marker is never searched for another.
pub fn render_prompt(
    t: &PromptTemplate,
    tbox_text: &str,
    examples: &[(&str, &str)],
    capability_id: &str,
    task: &str,
) -> Result<PromptInstance, PromptError> {
    if examples.len() != t.example_ids.len() {
        return Err(PromptError::Arity {
            technique: t.technique,
            expected: t.example_ids.len(),
            got: examples.len(),
        });
    }
    let examples_text: String = examples
        .iter()
        .enumerate()
        .map(|(i, (d, s))| example_block(i + 1, d, s))
        .collect();
    let mut out = String::with_capacity(t.body.len() + tbox_text.len() + examples_text.len() + task.len());
    let mut rest = t.body.as_str();
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let (fill, len) = if tail.starts_with("{CONTEXT}") {
            (tbox_text, "{CONTEXT}".len())
        } else if tail.starts_with("{EXAMPLES}") {
            (examples_text.as_str(), "{EXAMPLES}".len())
        } else if tail.starts_with("{TASK}") {
            (task, "{TASK}".len())
        } else {
            ("{", 1)
        };
        out.push_str(fill);
        rest = &tail[len..];
    }
    out.push_str(rest);
    Ok(PromptInstance {
        capability_id: capability_id.to_string(),
        technique: t.technique,
        token_estimate: estimate_tokens(&out),
        rendered_text: out,
    })
}

/// Capability-major, technique-minor cross product of rendered prompts.
pub fn build_matrix(
    capabilities: &[CapabilitySpec],
    templates: &[PromptTemplate],
    tbox_text: &str,
    examples: &[ExampleSpec],
) -> Result<Vec<PromptInstance>, PromptError> {
    let mut out = Vec::with_capacity(capabilities.len() * templates.len());
    for cap in capabilities {
        if !cap.is_target() {
            return Err(PromptError::ExampleAsTarget(cap.id.clone()));
        }
        for t in templates {
            let pairs = t
                .example_ids
                .iter()
                .map(|id| {
                    examples
                        .iter()
                        .find(|e| &e.id == id)
                        .map(|e| (e.description.as_str(), e.solution.as_str()))
                        .ok_or_else(|| PromptError::UnknownExample(id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(render_prompt(t, tbox_text, &pairs, &cap.id, &cap.description)?);
        }
    }
    Ok(out)
}
