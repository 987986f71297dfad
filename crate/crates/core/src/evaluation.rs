//! Scoring items and aggregating runs into accuracy and token summaries.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{AnswerLetter, DomainCode};
use crate::extraction::{ExtractedAnswer, ExtractionMethod};
use crate::inference::ModelResponse;
use crate::prompting::{McqItem, PromptStrategy};

/// Scored outcome of one item under one (model, strategy).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    /// `None` means the item had no domain label.
    pub domain: Option<DomainCode>,
    pub gold: AnswerLetter,
    pub predicted: Option<AnswerLetter>,
    pub correct: bool,
    pub method: ExtractionMethod,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub strategy: PromptStrategy,
    pub model: String,
}

pub fn score_item(
    item: &McqItem,
    extracted: &ExtractedAnswer,
    response: &ModelResponse,
    strategy: PromptStrategy,
    model: &str,
) -> ItemResult {
    ItemResult {
        id: item.id.clone(),
        domain: item.domain,
        gold: item.gold,
        predicted: extracted.letter,
        correct: extracted.letter == Some(item.gold),
        method: extracted.method,
        input_tokens: response.input_tokens,
        output_tokens: response.output_tokens,
        strategy,
        model: model.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub n: usize,
    pub correct: usize,
    pub accuracy_pct: f64,
    pub avg_input_k: f64,
    pub avg_output_k: f64,
}

impl BucketStats {
    fn from_results<'a>(results: impl Iterator<Item = &'a ItemResult>) -> BucketStats {
        let (mut n, mut correct, mut input, mut output) = (0usize, 0usize, 0u64, 0u64);
        for r in results {
            n += 1;
            correct += usize::from(r.correct);
            input += r.input_tokens;
            output += r.output_tokens;
        }
        let n_f = n.max(1) as f64;
        BucketStats {
            n,
            correct,
            accuracy_pct: 100.0 * correct as f64 / n_f,
            avg_input_k: input as f64 / n_f / 1000.0,
            avg_output_k: output as f64 / n_f / 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub strategy: PromptStrategy,
    pub n: usize,
    pub correct: usize,
    pub accuracy_pct: f64,
    pub per_domain: BTreeMap<DomainCode, BucketStats>,
    /// Items without a domain label: counted in the overall figures only.
    pub unlabeled: Option<BucketStats>,
    pub avg_input_k: f64,
    pub avg_output_k: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot aggregate an empty run")]
    EmptyRun,
    #[error("results mix (model, strategy) pairs: {0}")]
    MixedRun(String),
    #[error("runs are not comparable: {0}")]
    MismatchedRuns(String),
}

pub fn aggregate(results: &[ItemResult]) -> Result<RunSummary, EvalError> {
    let first = results.first().ok_or(EvalError::EmptyRun)?;
    if let Some(odd) = results
        .iter()
        .find(|r| r.model != first.model || r.strategy != first.strategy)
    {
        return Err(EvalError::MixedRun(format!(
            "{}/{} vs {}/{}",
            first.model, first.strategy, odd.model, odd.strategy
        )));
    }

    let overall = BucketStats::from_results(results.iter());
    let mut by_domain: BTreeMap<DomainCode, Vec<&ItemResult>> = BTreeMap::new();
    let mut unlabeled = Vec::new();
    for r in results {
        match r.domain {
            Some(d) => by_domain.entry(d).or_default().push(r),
            None => unlabeled.push(r),
        }
    }
    let per_domain = by_domain
        .into_iter()
        .map(|(d, rs)| (d, BucketStats::from_results(rs.into_iter())))
        .collect();
    let unlabeled =
        (!unlabeled.is_empty()).then(|| BucketStats::from_results(unlabeled.into_iter()));

    Ok(RunSummary {
        model: first.model.clone(),
        strategy: first.strategy,
        n: overall.n,
        correct: overall.correct,
        accuracy_pct: overall.accuracy_pct,
        per_domain,
        unlabeled,
        avg_input_k: overall.avg_input_k,
        avg_output_k: overall.avg_output_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

impl Direction {
    pub fn of(delta: f64) -> Direction {
        if delta > 0.0 {
            Direction::Up
        } else if delta < 0.0 {
            Direction::Down
        } else {
            Direction::Flat
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Up => "↑",
            Direction::Down => "↓",
            Direction::Flat => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSummary {
    pub baseline: RunSummary,
    pub comparison: RunSummary,
    /// comparison minus baseline, percentage points.
    pub delta_pp: f64,
    pub direction: Direction,
}

pub fn compare_to_baseline(
    run: &RunSummary,
    baseline: &RunSummary,
) -> Result<DeltaSummary, EvalError> {
    if run.n != baseline.n {
        return Err(EvalError::MismatchedRuns(format!(
            "{} has n={}, baseline {} has n={}",
            run.strategy, run.n, baseline.strategy, baseline.n
        )));
    }
    let delta_pp = run.accuracy_pct - baseline.accuracy_pct;
    Ok(DeltaSummary {
        baseline: baseline.clone(),
        comparison: run.clone(),
        delta_pp,
        direction: Direction::of(delta_pp),
    })
}

/// `80.52 (↑17.34)` style cell; no delta part when flat.
pub fn format_with_delta(value: f64, delta: f64) -> String {
    let dir = Direction::of(round2(delta));
    match dir {
        Direction::Flat => format!("{value:.2} (0.00)"),
        _ => format!("{value:.2} ({}{:.2})", dir.arrow(), delta.abs()),
    }
}

/// Rounds half away from zero to two decimals, for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn write_results_jsonl(path: &Path, results: &[ItemResult]) -> io::Result<()> {
    crate::jsonl::write_records(path, results)
}

pub fn read_results_jsonl(path: &Path) -> io::Result<Vec<ItemResult>> {
    crate::jsonl::read_records(path)
}

/// Long-format summary CSV: one `ALL` row per run followed by per-domain rows.
pub fn write_summary_csv(path: &Path, summaries: &[RunSummary]) -> io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model",
        "strategy",
        "domain",
        "n",
        "correct",
        "accuracy_pct",
        "avg_input_k",
        "avg_output_k",
    ])?;
    for s in summaries {
        let overall = BucketStats {
            n: s.n,
            correct: s.correct,
            accuracy_pct: s.accuracy_pct,
            avg_input_k: s.avg_input_k,
            avg_output_k: s.avg_output_k,
        };
        let rows = std::iter::once(("ALL".to_string(), overall))
            .chain(s.per_domain.iter().map(|(d, b)| (d.to_string(), *b)))
            .chain(s.unlabeled.map(|b| ("Unlabeled".to_string(), b)));
        for (domain, b) in rows {
            w.write_record([
                s.model.clone(),
                s.strategy.key(),
                domain,
                b.n.to_string(),
                b.correct.to_string(),
                format!("{:.2}", b.accuracy_pct),
                format!("{:.2}", b.avg_input_k),
                format!("{:.2}", b.avg_output_k),
            ])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::UsageSource;
    use AnswerLetter::*;

    fn result(domain: Option<DomainCode>, correct: bool, out: u64) -> ItemResult {
        ItemResult {
            id: "x".into(),
            domain,
            gold: A,
            predicted: Some(if correct { A } else { B }),
            correct,
            method: ExtractionMethod::Tagged,
            input_tokens: 70,
            output_tokens: out,
            strategy: PromptStrategy::Sp,
            model: "m".into(),
        }
    }

    fn extracted(letter: Option<AnswerLetter>, method: ExtractionMethod) -> ExtractedAnswer {
        ExtractedAnswer {
            letter,
            method,
            thinking: None,
            output_block: None,
        }
    }

    fn response() -> ModelResponse {
        ModelResponse {
            content: String::new(),
            input_tokens: 70,
            output_tokens: 450,
            usage_source: UsageSource::Provider,
            latency_ms: 1,
        }
    }

    fn item(gold: AnswerLetter) -> McqItem {
        McqItem {
            id: "1".into(),
            question: "q".into(),
            gold,
            domain: Some(DomainCode::Ethics),
        }
    }

    #[test]
    fn scoring_examples() {
        let r = score_item(
            &item(A),
            &extracted(Some(A), ExtractionMethod::Tagged),
            &response(),
            PromptStrategy::Sp,
            "m",
        );
        assert!(r.correct);
        assert_eq!((r.input_tokens, r.output_tokens), (70, 450));
        let r = score_item(
            &item(A),
            &extracted(None, ExtractionMethod::None),
            &response(),
            PromptStrategy::Sp,
            "m",
        );
        assert!(!r.correct);
        let r = score_item(
            &item(C),
            &extracted(Some(B), ExtractionMethod::FallbackPattern),
            &response(),
            PromptStrategy::Sp,
            "m",
        );
        assert!(!r.correct);
        assert_eq!(r.method, ExtractionMethod::FallbackPattern);
    }

    #[test]
    fn two_of_three() {
        let s = aggregate(&[
            result(None, true, 0),
            result(None, true, 0),
            result(None, false, 0),
        ])
        .unwrap();
        assert_eq!(format!("{:.2}", s.accuracy_pct), "66.67");
        assert!(s.per_domain.is_empty());
        assert_eq!(s.unlabeled.unwrap().n, 3);
    }

    #[test]
    fn all_correct_is_100_everywhere() {
        let rs: Vec<_> = DomainCode::ALL
            .into_iter()
            .map(|d| result(Some(d), true, 500))
            .collect();
        let s = aggregate(&rs).unwrap();
        assert_eq!(s.accuracy_pct, 100.0);
        assert!(s.per_domain.values().all(|b| b.accuracy_pct == 100.0));
        assert!((s.avg_output_k - 0.5).abs() < 1e-12);
        assert!((s.avg_input_k - 0.07).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mixed_runs() {
        assert_eq!(aggregate(&[]), Err(EvalError::EmptyRun));
        let mut other = result(None, true, 0);
        other.strategy = PromptStrategy::StCot;
        assert!(matches!(
            aggregate(&[result(None, true, 0), other]),
            Err(EvalError::MixedRun(_))
        ));
    }

    fn summary(acc: f64, n: usize) -> RunSummary {
        RunSummary {
            model: "Qwen3-8B-Base".into(),
            strategy: PromptStrategy::Sp,
            n,
            correct: 0,
            accuracy_pct: acc,
            per_domain: BTreeMap::new(),
            unlabeled: None,
            avg_input_k: 0.0,
            avg_output_k: 0.0,
        }
    }

    #[test]
    fn baseline_deltas() {
        let d = compare_to_baseline(&summary(80.52, 1032), &summary(63.18, 1032)).unwrap();
        assert!((d.delta_pp - 17.34).abs() < 1e-9);
        assert_eq!(d.direction, Direction::Up);
        assert_eq!(format_with_delta(80.52, d.delta_pp), "80.52 (↑17.34)");

        let d = compare_to_baseline(&summary(87.21, 1032), &summary(88.18, 1032)).unwrap();
        assert!((d.delta_pp + 0.97).abs() < 1e-9);
        assert_eq!(d.direction, Direction::Down);
        assert_eq!(format_with_delta(87.21, d.delta_pp), "87.21 (↓0.97)");

        let d = compare_to_baseline(&summary(70.0, 10), &summary(70.0, 10)).unwrap();
        assert_eq!(d.direction, Direction::Flat);

        assert!(matches!(
            compare_to_baseline(&summary(1.0, 10), &summary(1.0, 11)),
            Err(EvalError::MismatchedRuns(_))
        ));
    }

    #[test]
    fn summary_csv_has_overall_and_domain_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = aggregate(&[
            result(Some(DomainCode::Economics), true, 0),
            result(None, false, 0),
        ])
        .unwrap();
        write_summary_csv(&path, &[s]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("m,sp,ALL,2,1,50.00"));
        assert!(lines[2].starts_with("m,sp,Economics,1,1,100.00"));
        assert!(lines[3].starts_with("m,sp,Unlabeled,1,0,0.00"));
    }
}
