use std::fs;
use std::path::Path;

use fincot_core::blueprint::BlueprintRegistry;
use fincot_core::prompting::{assemble_prompt, golden_template, PromptKind};
use fincot_core::{AnswerLetter, DomainCode, FinCotMode, McqItem, PromptStrategy};

mod common;
use common::{FINCOT_AFTER_HINT, FINCOT_BEFORE_HINT, ST_COT};

fn item(domain: Option<DomainCode>) -> McqItem {
    McqItem {
        id: "golden-1".into(),
        question: "Which measure captures bond price sensitivity to yield changes?\nA. Duration\nB. Beta\nC. Alpha".into(),
        gold: AnswerLetter::A,
        domain,
    }
}

fn mermaid_source(file: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../blueprints")
        .join(file);
    let text = fs::read_to_string(path).unwrap();
    let (_, source) = text.split_once("---\n").unwrap();
    source.trim_end_matches('\n').to_string()
}

fn header_count(text: &str) -> usize {
    // `***Title:***` headers; the asterisks never occur elsewhere in the prompts.
    text.matches("***").count() / 2
}

#[test]
fn st_cot_byte_matches_transcription() {
    let reg = BlueprintRegistry::builtin();
    let p = assemble_prompt(PromptStrategy::StCot, &item(None), &reg).unwrap();
    assert_eq!(p.system, ST_COT);
    assert_eq!(golden_template(PromptKind::StCot), ST_COT);
    assert_eq!(p.user, item(None).question);
}

#[test]
fn fincot_single_domain_byte_matches() {
    let reg = BlueprintRegistry::builtin();
    let strategy = PromptStrategy::FinCot(FinCotMode::SingleDomain(DomainCode::Economics));
    let p = assemble_prompt(strategy, &item(None), &reg).unwrap();
    let expected = format!(
        "{FINCOT_BEFORE_HINT}***Economics:*** \n```mermaid\n{}\n```{FINCOT_AFTER_HINT}",
        mermaid_source("01_economics.mmd")
    );
    assert_eq!(p.system, expected);
}

#[test]
fn fincot_all_has_nine_headers_in_order() {
    let reg = BlueprintRegistry::builtin();
    let p = assemble_prompt(
        PromptStrategy::FinCot(FinCotMode::AllBlueprints),
        &item(None),
        &reg,
    )
    .unwrap();
    assert!(p.system.starts_with(FINCOT_BEFORE_HINT));
    assert!(p.system.ends_with(FINCOT_AFTER_HINT));
    assert_eq!(header_count(&p.system), 9);
    let titles = [
        "Economics",
        "Fixed Income",
        "Quantitative Methods",
        "Equity Investing",
        "Portfolio Management",
        "Derivatives",
        "Financial Reporting",
        "Alternative Investments",
        "Corporate Issuer Analysis",
    ];
    let positions: Vec<usize> = titles
        .iter()
        .map(|t| {
            p.system
                .find(&format!("***{t}:*** \n```mermaid\n"))
                .unwrap_or_else(|| panic!("missing {t}"))
        })
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(p.system.matches("```mermaid\n").count(), 9);
}

#[test]
fn routed_ethics_is_st_cot() {
    let reg = BlueprintRegistry::builtin();
    let p = assemble_prompt(
        PromptStrategy::FinCot(FinCotMode::Routed),
        &item(Some(DomainCode::Ethics)),
        &reg,
    )
    .unwrap();
    assert_eq!(p.system, ST_COT);
    assert!(p.hint_domains.is_empty());
}

#[test]
fn routed_domain_embeds_one_blueprint() {
    let reg = BlueprintRegistry::builtin();
    let p = assemble_prompt(
        PromptStrategy::FinCot(FinCotMode::Routed),
        &item(Some(DomainCode::Derivatives)),
        &reg,
    )
    .unwrap();
    assert_eq!(header_count(&p.system), 1);
    assert!(p.system.contains("***Derivatives:*** \n```mermaid\n"));
}

#[test]
fn template_files_match_transcription() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../templates");
    let st = fs::read_to_string(dir.join("st_cot.txt")).unwrap();
    assert_eq!(st.trim_end_matches('\n'), ST_COT);
    let fin = fs::read_to_string(dir.join("fincot.txt")).unwrap();
    assert_eq!(
        fin.trim_end_matches('\n'),
        format!("{FINCOT_BEFORE_HINT}{{{{HINT}}}}{FINCOT_AFTER_HINT}")
    );
}
