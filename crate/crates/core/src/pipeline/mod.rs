//! One experiment end to end, and whole studies over the capability matrix.

pub mod extract;
pub mod golddiff;
pub mod repair;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::StudyConfig;
use crate::consistency::{check_consistency, Contradiction};
use crate::corpus::Corpus;
use crate::llm::{CompletionRequest, CompletionResult, ExperimentKey, Gateway, LlmError, Mode};
use crate::prompt::{render_prompt, PromptError, PromptInstance, Technique};
use crate::rdf::count_triples;
use crate::report::{write_run_meta, ReportError, RunMeta};
use crate::scoring::{relative_scores, ErrorCounts, ErrorScores, ScoreError};
use crate::shacl::{classify, validate, Violation, ViolationKind};

pub use extract::{extract_ontology, ExtractionError, ExtractionResult, Segment, SegmentKind};
pub use golddiff::{align, AlignReason, AlignedPair, Alignment};
pub use repair::{repair, PrefixDecl, RepairError, RepairLog, Repaired, FALLBACK_ONTOLOGY};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("unknown capability {0}")]
    UnknownCapability(String),
    #[error("no {0} template in the corpus")]
    MissingTemplate(Technique),
    #[error("prompt: {0}")]
    Prompt(#[from] PromptError),
    #[error("completion: {0}")]
    Completion(#[from] LlmError),
    #[error("extraction: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("repair: {error}")]
    Repair {
        extraction: Box<ExtractionResult>,
        error: RepairError,
    },
    #[error("scoring: {0}")]
    Score(#[from] ScoreError),
    #[error("writing {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl StageError {
    pub fn stage(&self) -> &'static str {
        match self {
            StageError::UnknownCapability(_) | StageError::MissingTemplate(_) | StageError::Prompt(_) => "prompt",
            StageError::Completion(LlmError::Guard(_)) => "guard",
            StageError::Completion(_) => "completion",
            StageError::Extraction(_) => "extraction",
            StageError::Repair { .. } => "repair",
            StageError::Score(_) => "scoring",
            StageError::Io { .. } => "io",
        }
    }
}

/// How each count was assembled; stored next to the counts for audit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CountBreakdown {
    pub added_prefixes: usize,
    pub residual_syntax: usize,
    pub contradictions: usize,
    pub hallucinated: usize,
    pub min_count: usize,
    pub imports_added: usize,
    pub gold_missing: usize,
    pub covered_by_min_count: usize,
    pub excused_by_hallucination: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub extraction: ExtractionResult,
    pub repaired: Repaired,
    pub contradictions: Vec<Contradiction>,
    pub violations: Vec<Violation>,
    pub alignment: Alignment,
    pub breakdown: CountBreakdown,
    pub counts: ErrorCounts,
}

/// Everything after the completion: extract, repair, reason, validate, diff, count.
pub fn evaluate_response(corpus: &Corpus, capability_id: &str, response: &str) -> Result<Evaluation, StageError> {
    let gold = corpus
        .gold(capability_id)
        .ok_or_else(|| StageError::UnknownCapability(capability_id.to_string()))?;
    let extraction = extract_ontology(response)?;
    let repaired = repair(&extraction.ontology_text, &corpus.tbox_iri).map_err(|error| StageError::Repair {
        extraction: Box::new(extraction.clone()),
        error,
    })?;
    let graph = &repaired.graph;
    let contradictions = check_consistency(graph, &corpus.index);
    let violations = validate(graph, &corpus.shapes);
    let class = classify(&violations);
    let alignment = align(gold, graph);

    let mut min_pool: Vec<&Violation> = violations.iter().filter(|v| v.kind == ViolationKind::MinCount).collect();
    let mut h_pool: Vec<&Violation> = violations
        .iter()
        .filter(|v| v.kind.is_hallucination() && v.kind != ViolationKind::Closed)
        .collect();
    let mut covered = 0;
    let mut excused = 0;
    for t in &alignment.missing {
        let mapped = alignment.translate(t);
        let hit = |v: &&Violation| v.focus_node == mapped.subject && v.path.as_deref() == Some(mapped.predicate.value.as_str());
        if let Some(i) = min_pool.iter().position(hit) {
            min_pool.remove(i);
            covered += 1;
        } else if let Some(i) = h_pool.iter().position(hit) {
            h_pool.remove(i);
            excused += 1;
        }
    }

    let triples = count_triples(gold) as u64;
    let imports_added = repaired.log.added_imports.len();
    let raw_i = (imports_added + class.incomplete + alignment.missing.len() - covered - excused) as u64;
    let breakdown = CountBreakdown {
        added_prefixes: repaired.log.added_prefixes.len(),
        residual_syntax: 0,
        contradictions: contradictions.len(),
        hallucinated: class.hallucinated,
        min_count: class.incomplete,
        imports_added,
        gold_missing: alignment.missing.len(),
        covered_by_min_count: covered,
        excused_by_hallucination: excused,
        clamped: raw_i > triples,
    };
    let counts = ErrorCounts {
        syntax: (breakdown.added_prefixes + breakdown.residual_syntax) as u64,
        contradictions: contradictions.len() as u64,
        hallucinations: class.hallucinated as u64,
        incompleteness: raw_i.min(triples),
        triples,
    };
    Ok(Evaluation {
        extraction,
        repaired,
        contradictions,
        violations,
        alignment,
        breakdown,
        counts,
    })
}

pub fn render_for(corpus: &Corpus, capability_id: &str, technique: Technique) -> Result<PromptInstance, StageError> {
    let cap = corpus
        .capability(capability_id)
        .ok_or_else(|| StageError::UnknownCapability(capability_id.to_string()))?;
    let t = corpus.template(technique).ok_or(StageError::MissingTemplate(technique))?;
    let examples = t
        .example_ids
        .iter()
        .map(|id| {
            corpus
                .examples
                .iter()
                .find(|e| &e.id == id)
                .map(|e| (e.description.as_str(), e.solution.as_str()))
                .ok_or_else(|| PromptError::UnknownExample(id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(render_prompt(t, &corpus.tbox_text, &examples, &cap.id, &cap.description)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub capability_id: String,
    pub technique: Technique,
    pub provider: String,
    pub prompt: Option<PromptInstance>,
    pub completion: Option<CompletionResult>,
    pub extraction: Option<ExtractionResult>,
    pub repair: Option<RepairLog>,
    pub counts: Option<ErrorCounts>,
    pub scores: Option<ErrorScores>,
    pub failure: Option<Failure>,
    pub run_dir: PathBuf,
}

impl ExperimentRecord {
    pub fn key(&self) -> ExperimentKey {
        ExperimentKey::new(&self.capability_id, self.technique, &self.provider)
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Shared, read-only inputs of a study.
pub struct Study<'a> {
    pub corpus: &'a Corpus,
    pub config: &'a StudyConfig,
    pub gateway: &'a Gateway,
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("writing {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown capability {0}")]
    UnknownCapability(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("{provider}: environment variable {env_var} is not set")]
    MissingCredentials { provider: String, env_var: String },
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), StudyError> {
    std::fs::write(path, contents).map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn put(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), StageError> {
    std::fs::write(path, contents).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serialization");
    s.push('\n');
    s
}

pub fn experiment_dir(run_root: &Path, key: &ExperimentKey) -> PathBuf {
    run_root
        .join(&key.provider)
        .join(format!("{}-{}", key.capability, key.technique.key()))
}

/// Render, complete, evaluate and store one (capability, technique, provider) cell.
/// Stage failures are recorded, not propagated; only I/O errors escape.
pub fn run_experiment(
    study: &Study,
    capability_id: &str,
    technique: Technique,
    provider: &str,
    run_root: &Path,
) -> Result<ExperimentRecord, StudyError> {
    let key = ExperimentKey::new(capability_id, technique, provider);
    let dir = experiment_dir(run_root, &key);
    std::fs::create_dir_all(&dir).map_err(|source| StudyError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut rec = ExperimentRecord {
        capability_id: capability_id.to_string(),
        technique,
        provider: provider.to_string(),
        prompt: None,
        completion: None,
        extraction: None,
        repair: None,
        counts: None,
        scores: None,
        failure: None,
        run_dir: dir.clone(),
    };
    let profile = study.config.provider(provider)?.clone();

    let outcome: Result<(), StageError> = (|| {
        let prompt = render_for(study.corpus, capability_id, technique)?;
        put(&dir.join("prompt.txt"), &prompt.rendered_text)?;
        rec.prompt = Some(prompt.clone());
        let req = CompletionRequest {
            provider: profile,
            prompt: prompt.rendered_text,
            temperature: study.config.temperature,
            max_output_tokens: study.config.max_output_tokens,
            experiment_key: key.clone(),
        };
        let completion = study.gateway.complete(&req)?;
        put(&dir.join("response.txt"), &completion.text)?;
        put(&dir.join("completion.json"), json_pretty(&completion))?;
        rec.completion = Some(completion.clone());

        let eval = match evaluate_response(study.corpus, capability_id, &completion.text) {
            Err(StageError::Repair { extraction, error }) => {
                put(&dir.join("extracted.ttl"), &extraction.ontology_text)?;
                rec.extraction = Some(*extraction.clone());
                rec.repair = Some(error.log.clone());
                return Err(StageError::Repair { extraction, error });
            }
            other => other?,
        };
        put(&dir.join("extracted.ttl"), &eval.extraction.ontology_text)?;
        put(&dir.join("repaired.ttl"), &eval.repaired.text)?;
        put(&dir.join("violations.json"), json_pretty(&eval.violations))?;
        put(&dir.join("contradictions.json"), json_pretty(&eval.contradictions))?;
        put(
            &dir.join("alignment.json"),
            json_pretty(&json!({
                "extraction": &eval.extraction,
                "repair": &eval.repaired.log,
                "alignment": &eval.alignment,
            })),
        )?;
        let scores = relative_scores(&eval.counts)?;
        put(
            &dir.join("counts.json"),
            json_pretty(&json!({
                "experiment": key.to_string(),
                "counts": eval.counts,
                "breakdown": eval.breakdown,
                "scores": scores,
            })),
        )?;
        rec.extraction = Some(eval.extraction);
        rec.repair = Some(eval.repaired.log);
        rec.counts = Some(eval.counts);
        rec.scores = Some(scores);
        Ok(())
    })();

    if let Err(e) = outcome {
        if let StageError::Io { path, source } = e {
            return Err(StudyError::Io { path, source });
        }
        log::warn!("{key}: {} failed: {e}", e.stage());
        let failure = Failure {
            stage: e.stage().to_string(),
            message: e.to_string(),
        };
        write(
            &dir.join("counts.json"),
            json_pretty(&json!({ "experiment": key.to_string(), "failure": failure })),
        )?;
        rec.failure = Some(failure);
    }
    Ok(rec)
}

/// Which cells a study runs; empty capability list means all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyPlan {
    pub providers: Vec<String>,
    pub techniques: Vec<Technique>,
    pub capabilities: Vec<String>,
    pub parallelism: usize,
}

impl StudyPlan {
    pub fn from_config(cfg: &StudyConfig) -> StudyPlan {
        StudyPlan {
            providers: cfg.study.providers.clone(),
            techniques: cfg.study.techniques.clone(),
            capabilities: cfg.study.capabilities.clone(),
            parallelism: cfg.parallelism,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub run_dir: PathBuf,
    pub meta: RunMeta,
    pub records: Vec<ExperimentRecord>,
}

/// Fresh `out/runs/<UTC timestamp>` directory.
pub fn new_run_dir(out: &Path) -> Result<PathBuf, StudyError> {
    let runs = out.join("runs");
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let mut dir = runs.join(&stamp);
    let mut n = 1;
    while dir.exists() {
        dir = runs.join(format!("{stamp}-{n}"));
        n += 1;
    }
    std::fs::create_dir_all(&dir).map_err(|source| StudyError::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

/// Cross product provider x capability x technique, in that order.
pub fn run_study(study: &Study, plan: &StudyPlan) -> Result<StudyOutcome, StudyError> {
    let caps: Vec<String> = if plan.capabilities.is_empty() {
        study.corpus.capabilities.iter().map(|c| c.id.clone()).collect()
    } else {
        plan.capabilities.clone()
    };
    for c in &caps {
        if study.corpus.capability(c).is_none() {
            return Err(StudyError::UnknownCapability(c.clone()));
        }
    }
    let mut profiles = Vec::new();
    for p in &plan.providers {
        profiles.push(study.config.provider(p)?);
    }
    if study.gateway.mode() == Mode::Live {
        if let Some((provider, env_var)) = study.gateway.missing_credentials(profiles.iter().copied()) {
            return Err(StudyError::MissingCredentials { provider, env_var });
        }
    }

    let mut jobs = Vec::new();
    for p in &plan.providers {
        for c in &caps {
            for t in &plan.techniques {
                jobs.push((p.clone(), c.clone(), *t));
            }
        }
    }
    let run_dir = new_run_dir(&study.config.out)?;
    let meta = RunMeta {
        mode: study.gateway.mode(),
        started: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        corpus_hash: study.corpus.hash.clone(),
        providers: plan.providers.clone(),
        capability_names: study
            .corpus
            .capabilities
            .iter()
            .map(|c| (c.id.clone(), c.name.clone()))
            .collect(),
    };
    write_run_meta(&run_dir, &meta).map_err(|e| match e {
        ReportError::Io { path, source } => StudyError::Io { path, source },
        other => StudyError::Io {
            path: run_dir.join("run.json"),
            source: std::io::Error::other(other.to_string()),
        },
    })?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ExperimentRecord, StudyError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = plan.parallelism.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((p, c, t)) = jobs.get(i) else { break };
                let r = run_experiment(study, c, *t, p, &run_dir);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let records = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StudyOutcome { run_dir, meta, records })
}
