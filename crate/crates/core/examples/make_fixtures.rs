//! Regenerates `fixtures/{gpt,claude}/*.txt`.
//!
//! Each fixture is a gold ontology with faults injected so that the pipeline
//! yields the target (S, C, H, I) counts below, wrapped in a chat-style reply.
//!
//! cargo run -p ontogen-core --example make_fixtures -- corpus fixtures

use std::path::PathBuf;

use ontogen::corpus::Corpus;
use ontogen::faults::{inject, FaultSpec};
use ontogen::pipeline::evaluate_response;
use ontogen::prompt::Technique;
use ontogen::rdf::{Term, Triple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// (provider, capability, technique, [S, C, H, I])
const TARGETS: &[(&str, &str, &str, [u64; 4])] = &[
    ("gpt", "C1", "zero", [0, 2, 5, 7]),
    ("gpt", "C1", "one", [0, 0, 1, 1]),
    ("gpt", "C1", "few", [0, 0, 0, 0]),
    ("gpt", "C2", "zero", [0, 9, 8, 16]),
    ("gpt", "C2", "one", [0, 0, 3, 0]),
    ("gpt", "C2", "few", [0, 0, 1, 0]),
    ("gpt", "C3", "zero", [0, 2, 5, 21]),
    ("gpt", "C3", "one", [0, 0, 4, 11]),
    ("gpt", "C3", "few", [1, 0, 2, 5]),
    ("gpt", "C4", "zero", [1, 3, 1, 36]),
    ("gpt", "C4", "one", [0, 0, 2, 15]),
    ("gpt", "C4", "few", [1, 2, 0, 13]),
    ("gpt", "C5", "zero", [0, 3, 4, 24]),
    ("gpt", "C5", "one", [0, 0, 0, 5]),
    ("gpt", "C5", "few", [1, 0, 1, 3]),
    ("gpt", "C6", "zero", [0, 4, 5, 25]),
    ("gpt", "C6", "one", [0, 0, 0, 6]),
    ("gpt", "C6", "few", [0, 0, 0, 0]),
    ("gpt", "C7", "zero", [0, 2, 5, 66]),
    ("gpt", "C7", "one", [0, 0, 0, 30]),
    ("gpt", "C7", "few", [1, 4, 3, 41]),
    ("claude", "C1", "zero", [0, 0, 5, 8]),
    ("claude", "C1", "one", [0, 0, 0, 0]),
    ("claude", "C1", "few", [0, 0, 0, 0]),
    ("claude", "C2", "zero", [0, 0, 8, 14]),
    ("claude", "C2", "one", [0, 0, 11, 0]),
    ("claude", "C2", "few", [0, 0, 0, 0]),
    ("claude", "C3", "zero", [0, 0, 2, 27]),
    ("claude", "C3", "one", [0, 0, 0, 0]),
    ("claude", "C3", "few", [0, 0, 0, 0]),
    ("claude", "C4", "zero", [0, 5, 7, 50]),
    ("claude", "C4", "one", [0, 0, 0, 0]),
    ("claude", "C4", "few", [0, 0, 0, 6]),
    ("claude", "C5", "zero", [0, 0, 0, 24]),
    ("claude", "C5", "one", [0, 2, 2, 1]),
    ("claude", "C5", "few", [0, 2, 2, 2]),
    ("claude", "C6", "zero", [0, 0, 3, 17]),
    ("claude", "C6", "one", [0, 0, 1, 0]),
    ("claude", "C6", "few", [0, 0, 0, 0]),
    ("claude", "C7", "zero", [0, 0, 8, 81]),
    ("claude", "C7", "one", [0, 0, 0, 8]),
    ("claude", "C7", "few", [0, 0, 0, 12]),
];

const MAX_SEEDS: u64 = 500;

fn wrap(provider: &str, cap: &str, technique: Technique, n: usize, doc: &str, other: &str) -> String {
    match (provider, n % 4) {
        ("gpt", 0) => format!("```turtle\n{doc}```\n"),
        ("gpt", 1) => format!("Here is the capability ontology for {cap}:\n\n```turtle\n{doc}```\n"),
        ("gpt", 2) => format!(
            "```turtle\n{doc}```\n\nThis ontology models the capability with its inputs and outputs as described in the task.\n"
        ),
        ("gpt", _) => doc.to_string(),
        (_, 0) => format!(
            "Here is the {} ontology describing the capability:\n\n```turtle\n{doc}```\n\nThe capability is modelled with the CaSk vocabulary; inputs and outputs carry DIN EN 61360 data elements.\n",
            technique.label()
        ),
        (_, 1) => format!(
            "```turtle\n{doc}```\n\nTask description:\nA further capability to check whether a workpiece is present on a conveyor.\n\nSolution:\n```turtle\n{other}```\n"
        ),
        (_, 2) => format!("Sure. Below is the complete ontology.\n\n```\n{doc}```\n"),
        _ => format!("{doc}\nThe ontology above imports the CaSk model and can be loaded into any OWL tool.\n"),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let corpus_dir = PathBuf::from(args.first().map(String::as_str).unwrap_or("corpus"));
    let out = PathBuf::from(args.get(1).map(String::as_str).unwrap_or("fixtures"));
    let corpus = Corpus::load(&corpus_dir).expect("corpus");
    let other = corpus
        .examples
        .iter()
        .find(|e| e.id == "E2")
        .map(|e| e.solution.clone())
        .unwrap_or_default();

    for (n, &(provider, cap, tech, [s, c, h, i])) in TARGETS.iter().enumerate() {
        let technique: Technique = tech.parse().unwrap();
        let gold = corpus.gold(cap).expect("gold");
        let mut forced = Vec::new();
        if cap == "C5" {
            let ns = gold.prefixes().get("").cloned().unwrap_or_default();
            forced.push(Triple::new(
                Term::iri(format!("{ns}AGV")),
                Term::iri("http://www.w3id.org/hsu-aut/cask#provides"),
                Term::iri(format!("{ns}Transport")),
            ));
        }
        let drop_imports = technique == Technique::Zero;
        let fixed = forced.len() as u64 + drop_imports as u64;
        assert!(i >= fixed, "{provider} {cap} {tech}: I={i} below the fixed faults");
        let spec = FaultSpec {
            prefix_removals: s as usize,
            disjoint_injections: c as usize,
            closed_extras: h as usize,
            deletions: (i - fixed) as usize,
            drop_imports,
            forced_deletions: forced,
        };
        let mut done = false;
        for seed in 0..MAX_SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + n as u64);
            let Ok(doc) = inject(gold, &corpus.index, &spec, &mut rng) else { continue };
            let text = wrap(provider, cap, technique, n, &doc.text, &other);
            let Ok(eval) = evaluate_response(&corpus, cap, &text) else { continue };
            if eval.counts.as_array() == [s, c, h, i] {
                let dir = out.join(provider);
                std::fs::create_dir_all(&dir).unwrap();
                std::fs::write(dir.join(format!("{cap}-{tech}.txt")), text).unwrap();
                println!("{provider} {cap}-{tech}: seed {seed} -> {:?}", [s, c, h, i]);
                done = true;
                break;
            }
        }
        assert!(done, "{provider} {cap}-{tech}: no seed reproduces {:?}", [s, c, h, i]);
    }
}
