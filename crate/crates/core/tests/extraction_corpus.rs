use fincot_core::extraction::{extract_answer, ExtractionMethod};

mod common;
use common::{load_corpus, Case};

#[test]
fn corpus_is_large_enough_and_covers_every_method() {
    let cases = load_corpus();
    assert!(cases.len() >= 50, "only {} fixtures", cases.len());
    for m in [
        ExtractionMethod::Tagged,
        ExtractionMethod::FallbackPattern,
        ExtractionMethod::None,
    ] {
        assert!(cases.iter().any(|c| c.method == m), "no fixture for {m:?}");
    }
}

#[test]
fn every_fixture_matches_its_annotation() {
    let mismatches: Vec<String> = load_corpus()
        .iter()
        .filter_map(|c| {
            let got = extract_answer(&c.content);
            ((got.letter, got.method) != (c.letter, c.method)).then(|| {
                format!(
                    "{}: expected {:?}/{:?}, got {:?}/{:?}",
                    c.name, c.letter, c.method, got.letter, got.method
                )
            })
        })
        .collect();
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn tagged_recall_and_wrong_letter_rate() {
    let cases = load_corpus();
    let tagged: Vec<&Case> = cases
        .iter()
        .filter(|c| c.method == ExtractionMethod::Tagged)
        .collect();
    let recalled = tagged
        .iter()
        .filter(|c| extract_answer(&c.content).method == ExtractionMethod::Tagged)
        .count();
    assert_eq!(recalled, tagged.len());

    let wrong = cases
        .iter()
        .filter(|c| c.letter.is_some())
        .filter(|c| matches!(extract_answer(&c.content).letter, Some(l) if Some(l) != c.letter))
        .count();
    assert_eq!(wrong, 0);
}

#[test]
fn extraction_is_deterministic() {
    for c in load_corpus() {
        assert_eq!(
            extract_answer(&c.content),
            extract_answer(&c.content),
            "{}",
            c.name
        );
    }
}
