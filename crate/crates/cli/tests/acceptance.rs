//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Lines go straight to stderr so they show up without `--nocapture`.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;
#[path = "../../core/tests/support/stub.rs"]
mod stub;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use ontogen::config::StudyConfig;
use ontogen::corpus::Corpus;
use ontogen::faults::{inject, FaultSpec};
use ontogen::llm::{guard_context, CompletionRequest, ExperimentKey};
use ontogen::pipeline::{evaluate_response, render_for};
use ontogen::prompt::{count_example_blocks, Technique};
use ontogen::rdf::{parse_turtle, serialize_turtle, Graph, Term, Triple};
use ontogen::scoring::{completeness, display, mean_error, relative_scores, to_f64, ErrorCounts, Score};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const CAPS: [&str; 7] = ["C1", "C2", "C3", "C4", "C5", "C6", "C7"];
const TRIPLES: [u64; 7] = [33, 42, 52, 95, 83, 82, 120];
const TECHS: [&str; 3] = ["zero", "one", "few"];

/// Printed result tables: per capability, per technique (S, C, H, I, sum).
type Table = [[[f64; 5]; 3]; 7];

const GPT_TABLE: Table = [
    [[0.0, 0.06, 0.15, 0.21, 0.42], [0.0, 0.0, 0.03, 0.03, 0.06], [0.0, 0.0, 0.0, 0.0, 0.0]],
    [[0.0, 0.21, 0.19, 0.38, 0.79], [0.0, 0.0, 0.07, 0.0, 0.07], [0.0, 0.0, 0.02, 0.0, 0.02]],
    [[0.0, 0.04, 0.10, 0.40, 0.54], [0.0, 0.0, 0.08, 0.21, 0.29], [0.02, 0.0, 0.04, 0.10, 0.15]],
    [[0.01, 0.03, 0.01, 0.38, 0.43], [0.0, 0.0, 0.02, 0.16, 0.18], [0.01, 0.02, 0.0, 0.14, 0.17]],
    [[0.0, 0.04, 0.05, 0.29, 0.37], [0.0, 0.0, 0.0, 0.06, 0.06], [0.01, 0.0, 0.01, 0.04, 0.06]],
    [[0.0, 0.05, 0.06, 0.30, 0.41], [0.0, 0.0, 0.0, 0.07, 0.07], [0.0, 0.0, 0.0, 0.0, 0.0]],
    [[0.0, 0.02, 0.04, 0.55, 0.61], [0.0, 0.0, 0.0, 0.25, 0.25], [0.01, 0.03, 0.03, 0.34, 0.04]],
];

const CLAUDE_TABLE: Table = [
    [[0.0, 0.0, 0.15, 0.24, 0.39], [0.0; 5], [0.0; 5]],
    [[0.0, 0.0, 0.19, 0.33, 0.52], [0.0, 0.0, 0.26, 0.0, 0.26], [0.0; 5]],
    [[0.0, 0.0, 0.04, 0.52, 0.56], [0.0; 5], [0.0; 5]],
    [[0.0, 0.05, 0.07, 0.53, 0.65], [0.0; 5], [0.0, 0.0, 0.0, 0.06, 0.06]],
    [[0.0, 0.0, 0.0, 0.29, 0.29], [0.0, 0.02, 0.02, 0.01, 0.06], [0.0, 0.02, 0.02, 0.02, 0.07]],
    [[0.0, 0.0, 0.04, 0.21, 0.24], [0.0, 0.0, 0.01, 0.0, 0.01], [0.0; 5]],
    [[0.0, 0.0, 0.07, 0.68, 0.74], [0.0, 0.0, 0.0, 0.07, 0.07], [0.0, 0.0, 0.0, 0.10, 0.10]],
];

/// Absolute (S, C, H, I) counts consistent with the printed tables.
type Counts = [[[u64; 4]; 3]; 7];

const GPT_COUNTS: Counts = [
    [[0, 2, 5, 7], [0, 0, 1, 1], [0, 0, 0, 0]],
    [[0, 9, 8, 16], [0, 0, 3, 0], [0, 0, 1, 0]],
    [[0, 2, 5, 21], [0, 0, 4, 11], [1, 0, 2, 5]],
    [[1, 3, 1, 36], [0, 0, 2, 15], [1, 2, 0, 13]],
    [[0, 3, 4, 24], [0, 0, 0, 5], [1, 0, 1, 3]],
    [[0, 4, 5, 25], [0, 0, 0, 6], [0, 0, 0, 0]],
    [[0, 2, 5, 66], [0, 0, 0, 30], [1, 4, 3, 41]],
];

const CLAUDE_COUNTS: Counts = [
    [[0, 0, 5, 8], [0, 0, 0, 0], [0, 0, 0, 0]],
    [[0, 0, 8, 14], [0, 0, 11, 0], [0, 0, 0, 0]],
    [[0, 0, 2, 27], [0, 0, 0, 0], [0, 0, 0, 0]],
    [[0, 5, 7, 50], [0, 0, 0, 0], [0, 0, 0, 6]],
    [[0, 0, 0, 24], [0, 2, 2, 1], [0, 2, 2, 2]],
    [[0, 0, 3, 17], [0, 0, 1, 0], [0, 0, 0, 0]],
    [[0, 0, 8, 81], [0, 0, 0, 8], [0, 0, 0, 12]],
];

/// Completeness bars per capability (zero, one, few).
const GPT_CHART: Chart = [
    [0.79, 0.97, 1.0],
    [0.62, 1.0, 1.0],
    [0.6, 0.6, 0.79],
    [0.62, 0.84, 0.86],
    [0.71, 0.94, 0.96],
    [0.7, 0.93, 1.0],
    [0.45, 0.75, 0.66],
];

const CLAUDE_CHART: Chart = [
    [0.76, 1.0, 1.0],
    [0.67, 1.0, 1.0],
    [0.48, 1.0, 1.0],
    [0.47, 1.0, 0.94],
    [0.71, 0.99, 0.98],
    [0.79, 1.0, 1.0],
    [0.33, 0.93, 0.9],
];

type Chart = [[f64; 3]; 7];

const PROVIDERS: [(&str, &Table, &Counts, &Chart, [f64; 3]); 2] = [
    ("gpt", &GPT_TABLE, &GPT_COUNTS, &GPT_CHART, [0.51, 0.14, 0.12]),
    ("claude", &CLAUDE_TABLE, &CLAUDE_COUNTS, &CLAUDE_CHART, [0.49, 0.06, 0.03]),
];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn corpus() -> Corpus {
    Corpus::load(&root().join("corpus")).expect("corpus loads")
}

fn ontogen(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ontogen"));
    c.current_dir(root()).args(args).env("RUST_LOG", "error");
    c
}

fn run_ok(cmd: &mut Command) -> Result<Output, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

fn scores(triples: u64, c: [u64; 4]) -> ontogen::scoring::ErrorScores {
    relative_scores(&ErrorCounts::new(c[0], c[1], c[2], c[3], triples)).unwrap()
}

fn close(x: &Score, printed: f64) -> bool {
    (to_f64(x) - printed).abs() <= 0.01 + 1e-9
}

fn criterion_1() -> Check {
    let mut notes = Vec::new();
    let mut cells = 0;
    for (provider, table, counts, _, _) in PROVIDERS {
        for (ci, cap) in CAPS.iter().enumerate() {
            for ti in 0..3 {
                let s = scores(TRIPLES[ci], counts[ci][ti]);
                let row = table[ci][ti];
                for (k, comp) in s.components().iter().enumerate() {
                    ensure(close(comp, row[k]), || {
                        format!("{provider} {cap} {} component {k}: {} vs printed {}", TECHS[ti], display(comp), row[k])
                    })?;
                }
                if provider == "gpt" && *cap == "C7" && ti == 2 {
                    ensure(display(&s.sum) == "0.41", || format!("gpt C7 few sum is {}", display(&s.sum)))?;
                    notes.push(format!("gpt C7 few-shot sum asserted as {} (printed {})", display(&s.sum), row[4]));
                } else {
                    ensure(close(&s.sum, row[4]), || {
                        format!("{provider} {cap} {} sum {} vs printed {}", TECHS[ti], display(&s.sum), row[4])
                    })?;
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells within 0.01; {}", notes.join("; ")))
}

fn sums(triples: &[u64; 7], counts: &Counts, ti: usize) -> Vec<Score> {
    (0..7).map(|ci| scores(triples[ci], counts[ci][ti]).sum).collect()
}

fn criterion_2() -> Check {
    let mut out = Vec::new();
    for (provider, _, counts, _, printed) in PROVIDERS {
        let mut means = Vec::new();
        for ti in 0..3 {
            let m = mean_error(&sums(&TRIPLES, counts, ti)).unwrap();
            ensure(close(&m, printed[ti]), || {
                format!("{provider} {} mean {:.4} vs printed {}", TECHS[ti], to_f64(&m), printed[ti])
            })?;
            means.push(format!("{:.4}", to_f64(&m)));
        }
        out.push(format!("{provider} {}", means.join("/")));
    }
    Ok(out.join(", "))
}

fn criterion_3() -> Check {
    let mut flagged = Vec::new();
    let mut cells = 0;
    for (provider, _, counts, chart, _) in PROVIDERS {
        for (ci, cap) in CAPS.iter().enumerate() {
            for ti in 0..3 {
                let s = scores(TRIPLES[ci], counts[ci][ti]);
                let c = completeness(s.i_rel).unwrap();
                let bar = chart[ci][ti];
                if provider == "gpt" && *cap == "C3" && ti > 0 {
                    let expected = [0.79, 0.90][ti - 1];
                    ensure(close(&c, expected), || format!("gpt C3 {} completeness {}", TECHS[ti], display(&c)))?;
                    if !close(&c, bar) {
                        flagged.push(format!("gpt C3 {} chart {bar} vs table {}", TECHS[ti], display(&c)));
                    }
                } else {
                    ensure(close(&c, bar), || {
                        format!("{provider} {cap} {} completeness {} vs chart {bar}", TECHS[ti], display(&c))
                    })?;
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells; chart inconsistent with table: {}", flagged.join(", ")))
}

fn criterion_4() -> Check {
    for cap in CAPS {
        let gold = format!("corpus/capabilities/{cap}/gold.ttl");
        let out = run_ok(&mut ontogen(&["validate", &gold, cap]))?;
        let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let c = &v["counts"];
        let zero = ["S", "C", "H", "I"].iter().all(|k| c[k] == 0);
        ensure(zero, || format!("{cap}: {c}"))?;
        ensure(v["scores"]["sum"]["value"] == 0.0, || format!("{cap}: sum {}", v["scores"]["sum"]))?;
    }
    Ok("validate gold.ttl gives {0,0,0,0} for C1-C7".into())
}

fn criterion_5() -> Check {
    let c = corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut slack = [0usize; 3];
    for trial in 0..100 {
        let cap = &c.capabilities[rng.gen_range(0..c.capabilities.len())];
        let spec = FaultSpec {
            prefix_removals: rng.gen_range(0..=5),
            disjoint_injections: rng.gen_range(0..=5),
            closed_extras: rng.gen_range(0..=5),
            deletions: rng.gen_range(0..=5),
            ..FaultSpec::default()
        };
        let doc = inject(c.gold(&cap.id).unwrap(), &c.index, &spec, &mut rng).map_err(|e| e.to_string())?;
        let e = evaluate_response(&c, &cap.id, &doc.text).map_err(|e| format!("trial {trial}: {e}"))?;
        let [s, k, h, i] = e.counts.as_array();
        let k4 = spec.deletions as u64;
        ensure(
            s == spec.prefix_removals as u64
                && k == spec.disjoint_injections as u64
                && h == spec.closed_extras as u64
                && (k4..=k4 + 2).contains(&i),
            || format!("trial {trial} {} {spec:?} -> {:?}", cap.id, e.counts.as_array()),
        )?;
        slack[(i - k4) as usize] += 1;
    }
    Ok(format!("100 trials; I - k4 = 0/1/2 in {}/{}/{} trials", slack[0], slack[1], slack[2]))
}

fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
    let term = |rng: &mut ChaCha8Rng, literal: bool| -> Term {
        match rng.gen_range(0..if literal { 10 } else { 7 }) {
            0..=2 => Term::iri(format!("http://ex.org/n{}", rng.gen_range(0..6))),
            3 => Term::iri(["http://ex.org/ns#x", "urn:isbn:0451", "http://ex.org/trailing."][rng.gen_range(0..3)]),
            4..=6 => Term::blank(format!("b{}", rng.gen_range(0..5))),
            7 => Term::typed(rng.gen_range(-50..50).to_string(), "http://www.w3.org/2001/XMLSchema#integer"),
            8 => Term::lang(["hello", "a b", "x\"y"][rng.gen_range(0..3)], "en"),
            _ => Term::string(["", "line\nbreak", "tab\t", "back\\slash", "plain"][rng.gen_range(0..5)]),
        }
    };
    let preds = [
        "http://ex.org/p0",
        "http://ex.org/p1",
        "http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
        "http://www.w3.org/1999/02/22-rdf-syntax-ns#first",
        "http://www.w3.org/1999/02/22-rdf-syntax-ns#rest",
    ];
    let mut g = Graph::new();
    for _ in 0..rng.gen_range(0..=50) {
        let s = term(rng, false);
        let p = Term::iri(preds[rng.gen_range(0..preds.len())]);
        let o = term(rng, true);
        g.insert(Triple::new(s, p, o));
    }
    g
}

fn ttl_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            ttl_files(&p, out);
        } else if p.extension().is_some_and(|x| x == "ttl") {
            out.push(p);
        }
    }
}

fn round_trips(g: &Graph) -> Result<(), String> {
    let text = serialize_turtle(g);
    let back = parse_turtle(&text, None).map_err(|e| format!("{e:?}\n{text}"))?;
    ensure(oracle::brute_force_isomorphic(g, &back), || format!("not isomorphic:\n{text}"))
}

fn criterion_6() -> Check {
    let mut files = Vec::new();
    ttl_files(&root().join("corpus"), &mut files);
    files.sort();
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        let g = parse_turtle(&text, None).map_err(|e| format!("{}: {e:?}", f.display()))?;
        round_trips(&g).map_err(|e| format!("{}: {e}", f.display()))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 0..200 {
        let g = random_graph(&mut rng);
        round_trips(&g).map_err(|e| format!("random graph {n}: {e}"))?;
    }
    Ok(format!("{} corpus files and 200 random graphs", files.len()))
}

fn criterion_7() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&mut ontogen(&["gen-prompts", "--out", out]))?;
    let c = corpus();
    let mut n = 0;
    for e in std::fs::read_dir(dir.path().join("prompts")).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_stem().unwrap().to_str().unwrap().to_string();
        let (cap, tech) = name.split_once('-').ok_or_else(|| format!("odd file name {name}"))?;
        let t: Technique = tech.parse().map_err(|e| format!("{e}"))?;
        let text = std::fs::read_to_string(&p).unwrap();
        let blocks = count_example_blocks(&text);
        ensure(blocks == [0, 1, 3][t as usize], || format!("{name}: {blocks} example blocks"))?;
        ensure(text.contains(&c.tbox_text), || format!("{name}: TBox missing"))?;
        let desc = &c.capability(cap).ok_or("unknown capability")?.description;
        ensure(text.contains(desc.as_str()), || format!("{name}: task description missing"))?;
        n += 1;
    }
    ensure(n == 21, || format!("{n} prompts"))?;
    Ok("21 prompts; 0/1/3 example blocks; TBox and task embedded".into())
}

fn criterion_8() -> Check {
    let c = corpus();
    let cfg = StudyConfig::load(&root().join("study.json")).map_err(|e| e.to_string())?;
    let p = render_for(&c, "C1", Technique::One).map_err(|e| e.to_string())?;
    let dev = (p.token_estimate as f64 - 22_730.0) / 22_730.0;
    ensure(dev.abs() <= 0.20, || format!("estimate {} ({:+.1}%)", p.token_estimate, dev * 100.0))?;
    let verdict = |provider: &str, window: u64| {
        let mut profile = cfg.provider(provider).unwrap().clone();
        profile.context_window = window;
        guard_context(&CompletionRequest {
            provider: profile,
            prompt: p.rendered_text.clone(),
            temperature: 0.0,
            max_output_tokens: 10_000,
            experiment_key: ExperimentKey::new("C1", Technique::One, provider),
        })
    };
    ensure(verdict("gemini", 30_720).is_err(), || "30720 window accepted".into())?;
    ensure(verdict("gpt", 128_000).is_ok(), || "128000 window rejected".into())?;
    ensure(verdict("claude", 200_000).is_ok(), || "200000 window rejected".into())?;
    let largest = render_for(&c, "C7", Technique::Few).map_err(|e| e.to_string())?;
    Ok(format!(
        "parity one-shot ~{} tokens ({:+.1}%); rejected at 30720, accepted at 128000/200000; mixing few-shot ~{}",
        p.token_estimate,
        dev * 100.0,
        largest.token_estimate
    ))
}

fn single_run_dir(out: &Path) -> PathBuf {
    let runs: Vec<PathBuf> = std::fs::read_dir(out.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1, "{runs:?}");
    runs[0].clone()
}

/// Relative path -> bytes of every counts.json and report.md below `dir`.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(p.file_name().and_then(|n| n.to_str()), Some("counts.json" | "report.md")) {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_9() -> Check {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run_ok(&mut ontogen(&["replay", "--out", d.path().to_str().unwrap()]))?;
    }
    let (ra, rb) = (single_run_dir(a.path()), single_run_dir(b.path()));
    let (fa, fb) = (artifacts(&ra), artifacts(&rb));
    ensure(fa.len() == 43, || format!("{} artifacts", fa.len()))?;
    ensure(fa.keys().eq(fb.keys()), || "different artifact sets".into())?;
    for (k, v) in &fa {
        ensure(fb[k] == *v, || format!("{k} differs between runs"))?;
    }

    // the fixtures reproduce the back-solved counts
    for (provider, _, counts, _, _) in PROVIDERS {
        for (ci, cap) in CAPS.iter().enumerate() {
            for (ti, tech) in TECHS.iter().enumerate() {
                let v: Value = serde_json::from_slice(&fa[&format!("{provider}/{cap}-{tech}/counts.json")]).unwrap();
                let got: Vec<u64> = ["S", "C", "H", "I"].iter().map(|k| v["counts"][k].as_u64().unwrap_or(99)).collect();
                ensure(got == counts[ci][ti], || format!("{provider} {cap}-{tech}: {got:?} vs {:?}", counts[ci][ti]))?;
            }
        }
    }
    Ok("two replays byte-identical (42 counts.json + report.md); counts equal the back-solved table".into())
}

fn criterion_10() -> Check {
    let c = corpus();
    let gold = std::fs::read_to_string(root().join("corpus/capabilities/C1/gold.ttl")).unwrap();
    let reply = format!("Here is the ontology.\n\n```turtle\n{gold}```\n");
    let server = stub::Stub::start(vec![stub::error(503), stub::openai_ok(&reply, 9000, 700)]);

    let base: Value = serde_json::from_str(&std::fs::read_to_string(root().join("study.json")).unwrap()).unwrap();
    let mut gpt = base["providers"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "gpt")
        .unwrap()
        .clone();
    gpt["endpoint"] = Value::from(format!("{}/v1/chat/completions", server.base));
    gpt["requests_per_minute"] = Value::from(0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "corpus": root().join("corpus"),
        "fixtures": dir.path().join("no-fixtures"),
        "out": dir.path().join("out"),
        "providers": [gpt],
        "study": {"providers": ["gpt"], "techniques": ["zero"], "capabilities": ["C1"]},
        "temperature": 0.0,
        "retry": {"attempts": 3, "base_delay_ms": 10},
    });
    let cfg_path = dir.path().join("study.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let cfg_arg = cfg_path.to_str().unwrap();

    // without a key nothing is sent and the run refuses to start
    let out = ontogen(&["run", "--config", cfg_arg])
        .env_remove("OPENAI_API_KEY")
        .env_remove("ANTHROPIC_API_KEY")
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.code() == Some(2), || format!("missing key exit {:?}", out.status.code()))?;
    ensure(stderr.contains("OPENAI_API_KEY"), || format!("stderr does not name the variable: {stderr}"))?;
    ensure(server.requests().is_empty(), || "request sent without a key".into())?;

    run_ok(ontogen(&["run", "--config", cfg_arg]).env("OPENAI_API_KEY", "sk-stub"))?;
    let reqs = server.requests();
    ensure(reqs.len() == 2, || format!("{} requests", reqs.len()))?;
    let q = &reqs[1];
    ensure(q.path == "/v1/chat/completions", || q.path.clone())?;
    ensure(q.headers.get("authorization").map(String::as_str) == Some("Bearer sk-stub"), || "auth header".into())?;
    ensure(q.body["model"] == gpt["model_id"], || format!("model {}", q.body["model"]))?;
    ensure(q.body["temperature"] == 0.0, || format!("temperature {}", q.body["temperature"]))?;
    let prompt = render_for(&c, "C1", Technique::Zero).unwrap().rendered_text;
    ensure(q.body["messages"][0]["content"] == prompt.as_str(), || "prompt differs from gen-prompts".into())?;

    let exp = single_run_dir(&dir.path().join("out")).join("gpt/C1-zero");
    let completion: Value = serde_json::from_str(&std::fs::read_to_string(exp.join("completion.json")).unwrap()).unwrap();
    ensure(completion["mode"] == "live", || format!("mode {}", completion["mode"]))?;
    ensure(completion["retries"] == 1, || format!("retries {}", completion["retries"]))?;
    ensure(
        completion["input_tokens"] == 9000 && completion["output_tokens"] == 700,
        || format!("usage {} / {}", completion["input_tokens"], completion["output_tokens"]),
    )?;
    let rate = |k: &str| gpt[k].as_f64().unwrap();
    let cost = 9000.0 * rate("input_rate") / 1000.0 + 700.0 * rate("output_rate") / 1000.0;
    ensure(completion["cost"].as_f64() == Some(cost), || format!("cost {} vs {cost}", completion["cost"]))?;
    let counts: Value = serde_json::from_str(&std::fs::read_to_string(exp.join("counts.json")).unwrap()).unwrap();
    ensure(
        ["S", "C", "H", "I"].iter().all(|k| counts["counts"][k] == 0),
        || format!("counts {}", counts["counts"]),
    )?;
    Ok(format!(
        "stub: 503 retried once, Bearer auth, temperature 0, usage 9000/700 -> {cost:.2} USD; missing key exits 2 without sending"
    ))
}

/// Replay cost per prompt against the published averages; informational.
fn costs() -> String {
    let dir = tempfile::tempdir().unwrap();
    if run_ok(&mut ontogen(&["replay", "--format", "json", "--out", dir.path().to_str().unwrap()])).is_err() {
        return "replay failed".into();
    }
    let run = single_run_dir(dir.path());
    let mut out = Vec::new();
    for (provider, published) in [("gpt", 0.31), ("claude", 0.65)] {
        let mut total = 0.0;
        for cap in CAPS {
            for tech in TECHS {
                let p = run.join(format!("{provider}/{cap}-{tech}/completion.json"));
                let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
                total += v["cost"].as_f64().unwrap();
            }
        }
        let mean = total / 21.0;
        let dev = (mean - published) / published;
        let verdict = if dev.abs() <= 0.25 { "within" } else { "outside" };
        out.push(format!("{provider} {mean:.2} USD/prompt vs {published} ({:+.0}%, {verdict} 25%)", dev * 100.0));
    }
    out.join("; ")
}

type Criterion = (u32, &'static str, Duration, fn() -> Check);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "scoring reproduces the result tables", Duration::from_secs(1), criterion_1),
        (2, "mean error scores", Duration::from_secs(1), criterion_2),
        (3, "completeness matches the published chart", Duration::from_secs(1), criterion_3),
        (4, "gold self-test", Duration::from_secs(10), criterion_4),
        (5, "fault injection oracle", Duration::from_secs(60), criterion_5),
        (6, "parser round trip", Duration::from_secs(30), criterion_6),
        (7, "prompt matrix", Duration::from_secs(5), criterion_7),
        (8, "context guard", Duration::from_secs(1), criterion_8),
        (9, "replay determinism", Duration::from_secs(30), criterion_9),
        (10, "live mode against a stub server", Duration::from_secs(30), criterion_10),
    ];
    let mut err = std::io::stderr();
    err.write_all(b"\n").unwrap();
    let mut failed = Vec::new();
    for (n, title, budget, check) in criteria {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = t0.elapsed();
        let result = match result {
            Ok(note) if elapsed > budget => Err(format!("{note}; took {elapsed:.2?}, budget {budget:?}")),
            r => r,
        };
        let line = match &result {
            Ok(note) => format!("criterion {n:>2} PASS {title} [{elapsed:.2?}]: {note}\n"),
            Err(e) => format!("criterion {n:>2} FAIL {title} [{elapsed:.2?}]: {e}\n"),
        };
        err.write_all(line.as_bytes()).unwrap();
        if result.is_err() {
            failed.push(n);
        }
    }
    err.write_all(format!("info: replay cost {}\n", costs()).as_bytes()).unwrap();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
