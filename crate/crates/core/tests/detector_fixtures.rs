//! Hand-labeled fixture corpus against the seven detectors.

use std::collections::BTreeMap;

use serde::Deserialize;
use testqual_core::{analyze, Property};

#[derive(Deserialize)]
struct Corpus {
    case: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    id: String,
    focal: String,
    labels: BTreeMap<String, bool>,
    test: String,
}

fn load() -> Vec<Case> {
    let text = include_str!("fixtures/labeled_tests.toml");
    toml::from_str::<Corpus>(text)
        .expect("fixture corpus parses")
        .case
}

#[test]
fn corpus_is_large_and_covers_every_property() {
    let cases = load();
    assert!(cases.len() >= 50);
    for p in Property::ALL {
        let key = short(p);
        let trues = cases.iter().filter(|c| c.labels[key]).count();
        assert!(trues > 0 && trues < cases.len(), "{key} needs both labels");
    }
}

fn short(p: Property) -> &'static str {
    match p {
        Property::CorrectSyntax => "syntax",
        Property::HasAssertion => "assertion",
        Property::InvokesFocal => "focal",
        Property::HasComment => "comment",
        Property::DescriptiveName => "descriptive",
        Property::DuplicateAssertion => "dup",
        Property::ConditionalOrException => "cond",
    }
}

#[test]
fn detectors_match_hand_labels() {
    let mut disagreements = Vec::new();
    for case in load() {
        let report = analyze(&case.test, &case.focal);
        for p in Property::ALL {
            let want = case.labels[short(p)];
            if report.get(p) != want {
                disagreements.push(format!("{}: {} expected {want}", case.id, p));
            }
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:#?}");
}
