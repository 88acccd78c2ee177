use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::json;

use ontogen::config::StudyConfig;
use ontogen::corpus::Corpus;
use ontogen::llm::{cost_report, guard_context, CompletionRequest, ExperimentKey, Gateway, Mode};
use ontogen::pipeline::{evaluate_response, render_for, run_study, Study, StudyError, StudyPlan};
use ontogen::prompt::{count_example_blocks, Technique};
use ontogen::report::{load_run, CellResult, ReportFormat, StudyReport};
use ontogen::scoring::{display, relative_scores, ErrorCounts};

// stdout may be a closed pipe (`ontogen validate ... | head`)
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "ontogen", version, about = "Generate capability ontologies with LLMs and score them")]
struct Cli {
    /// Study configuration file
    #[arg(long, global = true, default_value = "study.json")]
    config: PathBuf,
    /// live or replay (must agree with the subcommand when given)
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Provider names, comma separated (default: from the config)
    #[arg(long, global = true, value_delimiter = ',')]
    providers: Vec<String>,
    /// zero, one, few
    #[arg(long, global = true, value_delimiter = ',')]
    techniques: Vec<Technique>,
    /// Capability ids such as C1,C5
    #[arg(long, global = true, value_delimiter = ',')]
    capabilities: Vec<String>,
    /// Output directory (default: from the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format(s): md, csv, json
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<ReportFormat>,
    /// Concurrent experiments
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the prompt matrix to files
    GenPrompts,
    /// Run the study against the providers' APIs
    Run,
    /// Run the study from stored responses
    Replay,
    /// Score a single ontology file against a capability's gold standard
    Validate { file: PathBuf, capability: String },
    /// Relative scores for a counts.json file
    Score { counts: PathBuf },
    /// Rebuild the report of a finished run
    Report { run_dir: PathBuf },
}

struct Fail(u8, String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(EXIT_CONFIG, e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Fail> {
    match &cli.command {
        Command::GenPrompts => gen_prompts(cli),
        Command::Run => study(cli, Mode::Live),
        Command::Replay => study(cli, Mode::Replay),
        Command::Validate { file, capability } => validate(cli, file, capability),
        Command::Score { counts } => score(counts),
        Command::Report { run_dir } => report(cli, run_dir),
    }
}

fn load(cli: &Cli) -> Result<(StudyConfig, Corpus), Fail> {
    let mut cfg = StudyConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    if !cli.providers.is_empty() {
        cfg.study.providers = cli.providers.clone();
    }
    if !cli.techniques.is_empty() {
        cfg.study.techniques = cli.techniques.clone();
    }
    if !cli.capabilities.is_empty() {
        cfg.study.capabilities = cli.capabilities.clone();
    }
    cfg.validate()?;
    let corpus = Corpus::load(&cfg.corpus)?;
    for c in &cfg.study.capabilities {
        if corpus.capability(c).is_none() {
            return Err(Fail(EXIT_CONFIG, format!("unknown capability {c}")));
        }
    }
    Ok((cfg, corpus))
}

fn capabilities(cfg: &StudyConfig, corpus: &Corpus) -> Vec<String> {
    if cfg.study.capabilities.is_empty() {
        corpus.capabilities.iter().map(|c| c.id.clone()).collect()
    } else {
        cfg.study.capabilities.clone()
    }
}

fn formats(cli: &Cli) -> Vec<ReportFormat> {
    if cli.format.is_empty() {
        ReportFormat::ALL.to_vec()
    } else {
        cli.format.clone()
    }
}

fn gen_prompts(cli: &Cli) -> Result<u8, Fail> {
    let (cfg, corpus) = load(cli)?;
    let dir = cfg.out.join("prompts");
    std::fs::create_dir_all(&dir)?;
    let mut n = 0;
    for cap in capabilities(&cfg, &corpus) {
        for &t in &cfg.study.techniques {
            let p = render_for(&corpus, &cap, t)?;
            std::fs::write(dir.join(format!("{cap}-{}.txt", t.key())), &p.rendered_text)?;
            let mut fits = Vec::new();
            for name in &cfg.study.providers {
                let req = CompletionRequest {
                    provider: cfg.provider(name)?.clone(),
                    prompt: p.rendered_text.clone(),
                    temperature: cfg.temperature,
                    max_output_tokens: cfg.max_output_tokens,
                    experiment_key: ExperimentKey::new(&cap, t, name),
                };
                let verdict = if guard_context(&req).is_ok() { "fits" } else { "too long" };
                fits.push(format!("{name} {verdict}"));
            }
            out!(
                "{cap} {:<9} examples={} tokens~{} [{}]",
                t.label(),
                count_example_blocks(&p.rendered_text),
                p.token_estimate,
                fits.join(", ")
            );
            n += 1;
        }
    }
    out!("{n} prompts written to {}", dir.display());
    Ok(0)
}

fn study(cli: &Cli, mode: Mode) -> Result<u8, Fail> {
    if let Some(m) = cli.mode {
        if m != mode {
            return Err(Fail(EXIT_CONFIG, format!("--mode {} conflicts with the subcommand", m)));
        }
    }
    let (mut cfg, corpus) = load(cli)?;
    cfg.mode = mode;
    let gateway = Gateway::new(mode, &cfg.fixtures)
        .with_retry(cfg.retry)
        .with_timeout(Duration::from_secs(cfg.timeout_secs));
    let plan = StudyPlan {
        capabilities: capabilities(&cfg, &corpus),
        ..StudyPlan::from_config(&cfg)
    };
    let study = Study {
        corpus: &corpus,
        config: &cfg,
        gateway: &gateway,
    };
    let outcome = match run_study(&study, &plan) {
        Ok(o) => o,
        Err(e @ StudyError::Io { .. }) => return Err(Fail(EXIT_FAILED, e.to_string())),
        Err(e) => return Err(Fail(EXIT_CONFIG, e.to_string())),
    };
    let cells: Vec<CellResult> = outcome.records.iter().map(CellResult::from).collect();
    let report = StudyReport::new(outcome.meta.clone(), outcome.run_dir.clone(), cells)?;
    let written = report.emit(&outcome.run_dir, &formats(cli))?;

    for r in &outcome.records {
        match (&r.scores, &r.failure) {
            (Some(s), _) => out!(
                "{:<16} S={} C={} H={} I={} sum={}",
                r.key().to_string(),
                display(&s.s_rel),
                display(&s.c_rel),
                display(&s.h_rel),
                display(&s.i_rel),
                display(&s.sum)
            ),
            (None, Some(f)) => out!("{:<16} FAILED at {}: {}", r.key().to_string(), f.stage, f.message),
            (None, None) => {}
        }
    }
    let completions: Vec<_> = outcome.records.iter().filter_map(|r| r.completion.clone()).collect();
    let costs = cost_report(&completions);
    out!(
        "{} experiments, {} failed, cost total {:.2} USD (mean {:.2} per prompt)",
        outcome.records.len(),
        outcome.records.iter().filter(|r| r.failed()).count(),
        costs.total,
        costs.mean
    );
    for w in written {
        out!("wrote {}", w.display());
    }
    Ok(if outcome.records.iter().any(|r| r.failed()) { EXIT_FAILED } else { 0 })
}

fn validate(cli: &Cli, file: &Path, capability: &str) -> Result<u8, Fail> {
    let (_, corpus) = load(cli)?;
    if corpus.capability(capability).is_none() {
        return Err(Fail(EXIT_CONFIG, format!("unknown capability {capability}")));
    }
    let text = std::fs::read_to_string(file).map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", file.display())))?;
    match evaluate_response(&corpus, capability, &text) {
        Ok(e) => {
            let scores = relative_scores(&e.counts)?;
            let out = json!({
                "capability": capability,
                "counts": e.counts,
                "breakdown": e.breakdown,
                "scores": scores,
                "repair": e.repaired.log,
                "contradictions": e.contradictions,
                "violations": e.violations,
                "missing_gold_triples": e.alignment.missing.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            });
            out!("{}", serde_json::to_string_pretty(&out)?);
            Ok(0)
        }
        Err(e) => Err(Fail(EXIT_FAILED, format!("{} failed: {e}", e.stage()))),
    }
}

fn score(path: &Path) -> Result<u8, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(f) = v.get("failure") {
        return Err(Fail(EXIT_FAILED, format!("experiment failed: {f}")));
    }
    let counts: ErrorCounts = serde_json::from_value(v.get("counts").cloned().unwrap_or(v))?;
    let s = relative_scores(&counts).map_err(|e| Fail(EXIT_FAILED, e.to_string()))?;
    out!("{}", serde_json::to_string_pretty(&json!({ "counts": counts, "scores": s }))?);
    Ok(0)
}

fn report(cli: &Cli, run_dir: &Path) -> Result<u8, Fail> {
    let r = load_run(run_dir).map_err(|e| Fail(EXIT_CONFIG, e.to_string()))?;
    let dir = cli.out.clone().unwrap_or_else(|| run_dir.to_path_buf());
    std::fs::create_dir_all(&dir)?;
    for w in r.emit(&dir, &formats(cli))? {
        out!("wrote {}", w.display());
    }
    Ok(0)
}
