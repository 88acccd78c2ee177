use std::path::PathBuf;

use ontogen::corpus::Corpus;
use ontogen::pipeline::evaluate_response;
use ontogen::scoring::relative_scores;
use ontogen::shacl::validate;
use ontogen::consistency::check_consistency;

fn corpus() -> Corpus {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    Corpus::load(&root).expect("corpus loads")
}

#[test]
fn corpus_shape() {
    let c = corpus();
    assert_eq!(c.capabilities.len(), 7);
    assert_eq!(c.examples.len(), 3);
    assert_eq!(c.templates.len(), 3);
    assert_eq!(c.shapes.len(), 6);
    assert!(c.shape_warnings.is_empty(), "{:?}", c.shape_warnings);
    assert_eq!(c.hash.len(), 64);
}

#[test]
fn golds_conform_and_are_consistent() {
    let c = corpus();
    for cap in &c.capabilities {
        let g = c.gold(&cap.id).unwrap();
        let v = validate(g, &c.shapes);
        assert!(v.is_empty(), "{}: {v:?}", cap.id);
        let k = check_consistency(g, &c.index);
        assert!(k.is_empty(), "{}: {k:?}", cap.id);
    }
}

#[test]
fn gold_as_response_scores_zero() {
    let c = corpus();
    for cap in &c.capabilities {
        let text = std::fs::read_to_string(&cap.gold_path).unwrap();
        let e = evaluate_response(&c, &cap.id, &text).unwrap();
        assert_eq!(e.counts.as_array(), [0, 0, 0, 0], "{}: {:?}", cap.id, e.breakdown);
        assert!(e.repaired.log.is_empty());
        let s = relative_scores(&e.counts).unwrap();
        assert_eq!(s.sum, 0.into());
        // fenced with chatter around it
        let chat = format!("Here is the ontology.\n\n```turtle\n{text}```\n\nIt models the capability.\n");
        assert_eq!(evaluate_response(&c, &cap.id, &chat).unwrap().counts.as_array(), [0, 0, 0, 0]);
    }
}
