//! Study reports: per-provider result tables, completeness series, costs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::llm::{CompletionResult, ExperimentKey, Mode};
use crate::pipeline::{ExperimentRecord, Failure};
use crate::prompt::Technique;
use crate::scoring::{completeness, display, mean_error, relative_scores, to_f64, ErrorCounts, ErrorScores, Score};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Bad { path: PathBuf, message: String },
    #[error("no experiments to report")]
    Empty,
}

/// One table cell: the outcome of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub provider: String,
    pub capability_id: String,
    pub technique: Technique,
    pub counts: Option<ErrorCounts>,
    pub cost: Option<f64>,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    pub run_path: PathBuf,
    pub failure: Option<Failure>,
}

impl CellResult {
    pub fn scores(&self) -> Option<ErrorScores> {
        self.counts.as_ref().and_then(|c| relative_scores(c).ok())
    }
}

impl From<&ExperimentRecord> for CellResult {
    fn from(r: &ExperimentRecord) -> Self {
        CellResult {
            provider: r.provider.clone(),
            capability_id: r.capability_id.clone(),
            technique: r.technique,
            counts: r.counts,
            cost: r.completion.as_ref().map(|c| c.cost),
            input_tokens: r.completion.as_ref().map(|c| c.input_tokens),
            output_tokens: r.completion.as_ref().map(|c| c.output_tokens),
            run_path: r.run_dir.clone(),
            failure: r.failure.clone(),
        }
    }
}

/// Written to `run.json` in every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub mode: Mode,
    pub started: String,
    pub corpus_hash: String,
    pub providers: Vec<String>,
    pub capability_names: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub meta: RunMeta,
    pub run_dir: PathBuf,
    pub cells: Vec<CellResult>,
}

#[derive(Deserialize)]
struct CountsFile {
    experiment: String,
    #[serde(default)]
    counts: Option<ErrorCounts>,
    #[serde(default)]
    failure: Option<FailureFile>,
}

#[derive(Deserialize)]
struct FailureFile {
    stage: String,
    message: String,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ReportError::Bad {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_run_meta(run_dir: &Path, meta: &RunMeta) -> Result<(), ReportError> {
    let path = run_dir.join("run.json");
    let text = serde_json::to_string_pretty(meta).expect("serializable") + "\n";
    std::fs::write(&path, text).map_err(|source| ReportError::Io { path, source })
}

/// Rebuild the cells of a finished run from its stored artifacts.
pub fn load_run(run_dir: &Path) -> Result<StudyReport, ReportError> {
    let meta: RunMeta = read_json(&run_dir.join("run.json"))?;
    let mut cells = Vec::new();
    let mut dirs = Vec::new();
    for provider in &meta.providers {
        let pdir = run_dir.join(provider);
        let Ok(entries) = std::fs::read_dir(&pdir) else { continue };
        for e in entries.flatten() {
            if e.path().join("counts.json").is_file() {
                dirs.push(e.path());
            }
        }
    }
    dirs.sort();
    for dir in dirs {
        let file: CountsFile = read_json(&dir.join("counts.json"))?;
        let key: ExperimentKey = file.experiment.parse().map_err(|message| ReportError::Bad {
            path: dir.join("counts.json"),
            message,
        })?;
        let completion: Option<CompletionResult> = dir
            .join("completion.json")
            .is_file()
            .then(|| read_json(&dir.join("completion.json")))
            .transpose()?;
        cells.push(CellResult {
            provider: key.provider,
            capability_id: key.capability,
            technique: key.technique,
            counts: file.counts,
            cost: completion.as_ref().map(|c| c.cost),
            input_tokens: completion.as_ref().map(|c| c.input_tokens),
            output_tokens: completion.as_ref().map(|c| c.output_tokens),
            run_path: dir,
            failure: file.failure.map(|f| Failure {
                stage: f.stage,
                message: f.message,
            }),
        });
    }
    if cells.is_empty() {
        return Err(ReportError::Empty);
    }
    Ok(StudyReport {
        meta,
        run_dir: run_dir.to_path_buf(),
        cells,
    })
}

fn cap_sort_key(id: &str) -> (u64, String) {
    let n = id.trim_start_matches(|c: char| !c.is_ascii_digit()).parse().unwrap_or(u64::MAX);
    (n, id.to_string())
}

impl StudyReport {
    pub fn new(meta: RunMeta, run_dir: PathBuf, cells: Vec<CellResult>) -> Result<Self, ReportError> {
        if cells.is_empty() {
            return Err(ReportError::Empty);
        }
        Ok(StudyReport { meta, run_dir, cells })
    }

    /// Providers in configured order, then any others alphabetically.
    pub fn providers(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .meta
            .providers
            .iter()
            .filter(|p| self.cells.iter().any(|c| &c.provider == *p))
            .cloned()
            .collect();
        let mut rest: Vec<String> = self
            .cells
            .iter()
            .map(|c| c.provider.clone())
            .filter(|p| !out.contains(p))
            .collect();
        rest.sort();
        rest.dedup();
        out.extend(rest);
        out
    }

    pub fn capabilities(&self) -> Vec<String> {
        let mut caps: Vec<String> = self.cells.iter().map(|c| c.capability_id.clone()).collect();
        caps.sort_by_key(|c| cap_sort_key(c));
        caps.dedup();
        caps
    }

    pub fn techniques(&self) -> Vec<Technique> {
        Technique::ALL
            .into_iter()
            .filter(|t| self.cells.iter().any(|c| c.technique == *t))
            .collect()
    }

    pub fn cell(&self, provider: &str, cap: &str, t: Technique) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.provider == provider && c.capability_id == cap && c.technique == t)
    }

    /// Mean of per-capability sums over the successful cells of one column.
    pub fn mean_error(&self, provider: &str, t: Technique) -> Option<Score> {
        let sums: Vec<Score> = self
            .cells
            .iter()
            .filter(|c| c.provider == provider && c.technique == t)
            .filter_map(|c| c.scores())
            .map(|s| s.sum)
            .collect();
        mean_error(&sums).ok()
    }

    fn cap_label(&self, id: &str) -> String {
        match self.meta.capability_names.get(id) {
            Some(name) => format!("{id}: {name}"),
            None => id.to_string(),
        }
    }

    fn triples(&self, cap: &str) -> Option<u64> {
        self.cells
            .iter()
            .filter(|c| c.capability_id == cap)
            .find_map(|c| c.counts.map(|k| k.triples))
    }

    pub fn failures(&self) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.failure.is_some()).collect()
    }

    pub fn to_markdown(&self) -> String {
        let techniques = self.techniques();
        let caps = self.capabilities();
        let providers = self.providers();
        let mut md = String::new();
        writeln!(md, "# Study results\n").unwrap();
        writeln!(md, "Mode: {}. Corpus: `{}`.\n", self.meta.mode, short_hash(&self.meta.corpus_hash)).unwrap();
        writeln!(md, "S: syntax errors, C: contradictions, H: hallucinations, I: incompleteness; all relative to the gold triple count.\n").unwrap();

        for p in &providers {
            writeln!(md, "## {p}\n").unwrap();
            let mut header = String::from("| Capability | Triples |");
            let mut rule = String::from("|---|---:|");
            for t in &techniques {
                for col in ["S", "C", "H", "I", "Σ"] {
                    write!(header, " {} {col} |", t.key()).unwrap();
                    rule.push_str("---:|");
                }
            }
            writeln!(md, "{header}\n{rule}").unwrap();
            for cap in &caps {
                let triples = self.triples(cap).map_or("n/a".into(), |t| t.to_string());
                write!(md, "| {} | {triples} |", self.cap_label(cap)).unwrap();
                for t in &techniques {
                    match self.cell(p, cap, *t).and_then(|c| c.scores()) {
                        Some(s) => {
                            for x in s.components().iter().chain([&s.sum]) {
                                write!(md, " {} |", display(x)).unwrap();
                            }
                        }
                        None => md.push_str(&" n/a |".repeat(5)),
                    }
                }
                md.push('\n');
            }
            write!(md, "| Mean error score | |").unwrap();
            for t in &techniques {
                let m = self.mean_error(p, *t).map_or("n/a".into(), |m| display(&m));
                write!(md, " | | | | {m} |").unwrap();
            }
            md.push_str("\n\n");
        }

        if providers.len() > 1 {
            writeln!(md, "## Mean error comparison\n").unwrap();
            writeln!(md, "| Technique |{}", providers.iter().map(|p| format!(" {p} |")).collect::<String>()).unwrap();
            writeln!(md, "|---|{}", "---:|".repeat(providers.len())).unwrap();
            for t in &techniques {
                write!(md, "| {} |", t.label()).unwrap();
                for p in &providers {
                    let m = self.mean_error(p, *t).map_or("n/a".into(), |m| display(&m));
                    write!(md, " {m} |").unwrap();
                }
                md.push('\n');
            }
            md.push('\n');
        }

        writeln!(md, "## Completeness (1 - I)\n").unwrap();
        let mut header = String::from("| Capability |");
        let mut rule = String::from("|---|");
        for p in &providers {
            for t in &techniques {
                write!(header, " {p} {} |", t.key()).unwrap();
                rule.push_str("---:|");
            }
        }
        writeln!(md, "{header}\n{rule}").unwrap();
        for cap in &caps {
            write!(md, "| {} |", self.cap_label(cap)).unwrap();
            for p in &providers {
                for t in &techniques {
                    let v = self
                        .cell(p, cap, *t)
                        .and_then(|c| c.scores())
                        .and_then(|s| completeness(s.i_rel).ok())
                        .map_or("n/a".into(), |v| display(&v));
                    write!(md, " {v} |").unwrap();
                }
            }
            md.push('\n');
        }
        md.push('\n');

        writeln!(md, "## Cost\n").unwrap();
        writeln!(md, "| Provider | Prompts | Input tokens | Output tokens | Total USD | Mean USD per prompt |").unwrap();
        writeln!(md, "|---|---:|---:|---:|---:|---:|").unwrap();
        for p in &providers {
            let done: Vec<&CellResult> = self.cells.iter().filter(|c| &c.provider == p && c.cost.is_some()).collect();
            let total: f64 = done.iter().filter_map(|c| c.cost).sum();
            let mean = if done.is_empty() { 0.0 } else { total / done.len() as f64 };
            let tin: u64 = done.iter().filter_map(|c| c.input_tokens).sum();
            let tout: u64 = done.iter().filter_map(|c| c.output_tokens).sum();
            writeln!(md, "| {p} | {} | {tin} | {tout} | {total:.2} | {mean:.2} |", done.len()).unwrap();
        }

        let failures = self.failures();
        if !failures.is_empty() {
            writeln!(md, "\n## Failed experiments\n").unwrap();
            for c in failures {
                let f = c.failure.as_ref().unwrap();
                writeln!(md, "- {}-{}-{}: {} ({})", c.capability_id, c.technique.key(), c.provider, f.message, f.stage).unwrap();
            }
        }
        md
    }

    /// One row per cell with exact-as-float values and their display form.
    pub fn to_csv(&self) -> String {
        let mut csv = String::from(
            "provider,capability,technique,triples,S,C,H,I,S_rel,C_rel,H_rel,I_rel,sum,sum_display,completeness,completeness_display,cost_usd,status\n",
        );
        for p in self.providers() {
            for cap in self.capabilities() {
                for t in self.techniques() {
                    let Some(c) = self.cell(&p, &cap, t) else { continue };
                    let cost = c.cost.map_or(String::new(), |x| x.to_string());
                    match (c.counts, c.scores()) {
                        (Some(k), Some(s)) => {
                            let comp = s.completeness();
                            writeln!(
                                csv,
                                "{p},{cap},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{cost},ok",
                                t.key(),
                                k.triples,
                                k.syntax,
                                k.contradictions,
                                k.hallucinations,
                                k.incompleteness,
                                to_f64(&s.s_rel),
                                to_f64(&s.c_rel),
                                to_f64(&s.h_rel),
                                to_f64(&s.i_rel),
                                to_f64(&s.sum),
                                display(&s.sum),
                                to_f64(&comp),
                                display(&comp),
                            )
                            .unwrap();
                        }
                        _ => {
                            let stage = c.failure.as_ref().map_or("unknown", |f| f.stage.as_str());
                            writeln!(csv, "{p},{cap},{},,,,,,,,,,,,,,{cost},failed:{stage}", t.key()).unwrap();
                        }
                    }
                }
            }
        }
        csv
    }

    pub fn to_json(&self) -> Value {
        let mut providers = serde_json::Map::new();
        let mut series = serde_json::Map::new();
        for p in self.providers() {
            let cells: Vec<Value> = self
                .cells
                .iter()
                .filter(|c| c.provider == p)
                .map(|c| {
                    json!({
                        "capability": c.capability_id,
                        "technique": c.technique.key(),
                        "counts": c.counts,
                        "scores": c.scores(),
                        "completeness": c.scores().map(|s| to_f64(&s.completeness())),
                        "cost_usd": c.cost,
                        "run_path": c.run_path,
                        "failure": c.failure,
                    })
                })
                .collect();
            let means: serde_json::Map<String, Value> = self
                .techniques()
                .into_iter()
                .map(|t| (t.key().to_string(), json!(self.mean_error(&p, t).map(|m| to_f64(&m)))))
                .collect();
            providers.insert(p.clone(), json!({ "cells": cells, "mean_error": means }));
            let mut by_cap = serde_json::Map::new();
            for cap in self.capabilities() {
                let s: serde_json::Map<String, Value> = self
                    .techniques()
                    .into_iter()
                    .map(|t| {
                        let v = self.cell(&p, &cap, t).and_then(|c| c.scores()).map(|s| to_f64(&s.completeness()));
                        (t.key().to_string(), json!(v))
                    })
                    .collect();
                by_cap.insert(cap, Value::Object(s));
            }
            series.insert(p, Value::Object(by_cap));
        }
        json!({
            "metadata": {
                "mode": self.meta.mode,
                "started": self.meta.started,
                "corpus_hash": self.meta.corpus_hash,
                "run_dir": self.run_dir,
            },
            "providers": providers,
            "completeness": series,
        })
    }

    /// Writes the requested formats (md, csv, json) into `dir`.
    pub fn emit(&self, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, ReportError> {
        let mut written = Vec::new();
        for f in formats {
            let (name, body) = match f {
                ReportFormat::Md => ("report.md", self.to_markdown()),
                ReportFormat::Csv => ("report.csv", self.to_csv()),
                ReportFormat::Json => (
                    "report.json",
                    serde_json::to_string_pretty(&self.to_json()).expect("serializable") + "\n",
                ),
            };
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| ReportError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

fn short_hash(h: &str) -> &str {
    h.get(..12).unwrap_or(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Md,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Md, ReportFormat::Csv, ReportFormat::Json];
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Md),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (md, csv or json)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(providers: &[&str]) -> RunMeta {
        RunMeta {
            mode: Mode::Replay,
            started: "t".into(),
            corpus_hash: "abcdef0123456789".into(),
            providers: providers.iter().map(|s| s.to_string()).collect(),
            capability_names: BTreeMap::from([("C1".to_string(), "Parity".to_string())]),
        }
    }

    fn cell(p: &str, cap: &str, t: Technique, k: [u64; 4], triples: u64) -> CellResult {
        CellResult {
            provider: p.into(),
            capability_id: cap.into(),
            technique: t,
            counts: Some(ErrorCounts::new(k[0], k[1], k[2], k[3], triples)),
            cost: Some(0.25),
            input_tokens: Some(100),
            output_tokens: Some(10),
            run_path: PathBuf::from(format!("runs/x/{p}/{cap}-{}", t.key())),
            failure: None,
        }
    }

    #[test]
    fn single_record_single_row() {
        let r = StudyReport::new(meta(&["gpt"]), "x".into(), vec![cell("gpt", "C1", Technique::Zero, [0, 2, 5, 7], 33)]).unwrap();
        let md = r.to_markdown();
        assert!(md.contains("| C1: Parity | 33 | 0.00 | 0.06 | 0.15 | 0.21 | 0.42 |"));
        assert_eq!(md.matches("| C1: Parity | 33 |").count(), 1);
        assert!(!md.contains("Mean error comparison"));
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn two_providers_get_a_comparison() {
        let cells = vec![
            cell("claude", "C1", Technique::Zero, [0, 0, 5, 8], 33),
            cell("gpt", "C1", Technique::Zero, [0, 2, 5, 7], 33),
        ];
        let r = StudyReport::new(meta(&["gpt", "claude"]), "x".into(), cells).unwrap();
        assert_eq!(r.providers(), vec!["gpt", "claude"]);
        let md = r.to_markdown();
        assert!(md.find("## gpt").unwrap() < md.find("## claude").unwrap());
        assert!(md.contains("| zero-shot | 0.42 | 0.39 |"));
        let j = r.to_json();
        assert_eq!(j["providers"]["gpt"]["cells"][0]["run_path"], "runs/x/gpt/C1-zero");
    }

    #[test]
    fn failed_cells_are_marked() {
        let mut c = cell("gpt", "C1", Technique::One, [0, 0, 0, 0], 33);
        c.counts = None;
        c.failure = Some(Failure {
            stage: "extraction".into(),
            message: "no Turtle".into(),
        });
        let r = StudyReport::new(meta(&["gpt"]), "x".into(), vec![c]).unwrap();
        assert!(r.to_markdown().contains("n/a"));
        assert!(r.to_csv().contains("failed:extraction"));
        assert!(StudyReport::new(meta(&[]), "x".into(), vec![]).is_err());
    }
}
