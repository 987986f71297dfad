//! Domain routing: classifying questions into the ten CFA category codes.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::domain::DomainCode;
use crate::inference::{ChatClient, GenerationParams, InferenceError, ModelResponse, UsageSource};
use crate::jsonl;
use crate::pool::run_bounded;
use crate::prompting::McqItem;

/// System instruction sent to the classifier, verbatim.
pub const CLASSIFY_SYSTEM_INSTRUCTION: &str =
    include_str!("../../../templates/classify_domain.txt");

/// Appended to the question on the single retry.
pub const RETRY_SUFFIX: &str = "Respond with only the category code.";

#[derive(Debug, thiserror::Error)]
pub enum RoutingError {
    #[error("unrecognized domain code {0:?}")]
    UnrecognizedCode(String),
    #[error("classification of item {id:?} failed after retry; last reply {reply:?}")]
    ClassificationFailed { id: String, reply: String },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("label cache {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn normalize(s: &str) -> &str {
    s.trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_end()
}

/// Strict parse of a classifier reply.
///
/// Whitespace and trailing punctuation are trimmed from both the reply and
/// the codes before an exact, case-sensitive comparison.
pub fn parse_domain_code(raw: &str) -> Result<DomainCode, RoutingError> {
    let wanted = normalize(raw);
    DomainCode::ALL
        .into_iter()
        .find(|d| !wanted.is_empty() && normalize(d.as_str()) == wanted)
        .ok_or_else(|| RoutingError::UnrecognizedCode(raw.to_string()))
}

/// Classification runs at temperature 0.
pub fn classifier_params(model: impl Into<String>) -> GenerationParams {
    let mut p = GenerationParams::new(model);
    p.temperature = 0.0;
    p
}

pub fn classify_domain(
    item: &McqItem,
    classifier: &dyn ChatClient,
    params: &GenerationParams,
) -> Result<DomainCode, RoutingError> {
    let reply = classifier.complete(CLASSIFY_SYSTEM_INSTRUCTION, &item.question, params)?;
    if let Ok(code) = parse_domain_code(&reply.content) {
        return Ok(code);
    }
    let retry_user = format!("{}\n\n{RETRY_SUFFIX}", item.question);
    let reply = classifier.complete(CLASSIFY_SYSTEM_INSTRUCTION, &retry_user, params)?;
    parse_domain_code(&reply.content).map_err(|_| RoutingError::ClassificationFailed {
        id: item.id.clone(),
        reply: reply.content,
    })
}

/// Deterministic keyword classifier standing in for a hosted model.
///
/// Keywords come from the category descriptions of the classification
/// instruction. The code with the most keyword hits wins; ties go to the
/// earlier code. With no hits the reply is not a code at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedClassifier;

const KEYWORDS: [(DomainCode, &[&str]); 10] = [
    (
        DomainCode::Ethics,
        &[
            "code of ethics",
            "professional conduct",
            "ethical",
            "integrity",
            "professional responsibilit",
            "client interests",
        ],
    ),
    (
        DomainCode::QuantMeth,
        &[
            "statistic",
            "probability",
            "hypothesis",
            "time value of money",
            "financial mathematics",
            "regression",
        ],
    ),
    (
        DomainCode::Economics,
        &[
            "microeconomic",
            "macroeconomic",
            "supply",
            "demand",
            "market structure",
            "gdp",
            "inflation",
            "monetary policy",
            "economic cycle",
        ],
    ),
    (
        DomainCode::FinReporting,
        &[
            "financial statement",
            "accounting standard",
            "ratio analysis",
            "balance sheet",
            "income statement",
            "cash flow analysis",
            "cash flow statement",
        ],
    ),
    (
        DomainCode::CorpIssuers,
        &[
            "capital structure",
            "dividend policy",
            "corporate governance",
            "merger",
            "acquisition",
            "capital budgeting",
        ],
    ),
    (
        DomainCode::EquityInvest,
        &[
            "stock valuation",
            "equity market",
            "company analysis",
            "market efficiency",
            "equity portfolio",
        ],
    ),
    (
        DomainCode::FixedIncome,
        &[
            "bond",
            "yield curve",
            "duration",
            "credit analysis",
            "fixed income",
            "fixed-income",
        ],
    ),
    (
        DomainCode::Derivatives,
        &[
            "call option",
            "put option",
            "futures",
            "forward contract",
            "swap",
            "hedging",
            "derivative",
        ],
    ),
    (
        DomainCode::AlterInvest,
        &[
            "real estate",
            "private equity",
            "hedge fund",
            "commodit",
            "structured product",
            "crypto",
        ],
    ),
    (
        DomainCode::PortManage,
        &[
            "asset allocation",
            "portfolio construction",
            "rebalanc",
            "performance measurement",
            "client objective",
        ],
    ),
];

impl RuleBasedClassifier {
    pub fn classify_text(&self, text: &str) -> Option<DomainCode> {
        let lower = text.to_lowercase();
        let mut best: Option<(DomainCode, usize)> = None;
        for (code, words) in KEYWORDS {
            let hits: usize = words.iter().map(|w| lower.matches(w).count()).sum();
            if hits > 0 && !matches!(best, Some((_, b)) if hits <= b) {
                best = Some((code, hits));
            }
        }
        best.map(|(c, _)| c)
    }
}

impl ChatClient for RuleBasedClassifier {
    fn complete(
        &self,
        _system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        params.validate()?;
        let question = user.strip_suffix(RETRY_SUFFIX).unwrap_or(user);
        let content = match self.classify_text(question) {
            Some(code) => code.as_str().to_string(),
            None => "Unclassified".to_string(),
        };
        Ok(ModelResponse {
            content,
            input_tokens: 0,
            output_tokens: 0,
            usage_source: UsageSource::Approximate,
            latency_ms: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Classifier,
    File,
    Manual,
}

/// One line of the label cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub domain: DomainCode,
    pub source: LabelSource,
}

/// Item id to domain label. Backed by an append-only JSONL file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainLabelCache {
    entries: IndexMap<String, LabelRecord>,
}

impl DomainLabelCache {
    /// Reads a cache file; a missing file is an empty cache. Unparsable
    /// lines (a torn final write) are skipped and later lines win.
    pub fn load(path: &Path) -> Result<Self, RoutingError> {
        let records: Vec<LabelRecord> =
            jsonl::read_records(path).map_err(|source| RoutingError::Io {
                path: path.display().to_string(),
                source,
            })?;
        let mut cache = Self::default();
        for rec in records {
            cache.insert(rec);
        }
        Ok(cache)
    }

    pub fn insert(&mut self, rec: LabelRecord) {
        self.entries.insert(rec.id.clone(), rec);
    }

    pub fn get(&self, id: &str) -> Option<DomainCode> {
        self.entries.get(id).map(|r| r.domain)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &LabelRecord> {
        self.entries.values()
    }

    /// Count per domain, all ten codes present, in code order.
    pub fn distribution(&self) -> BTreeMap<DomainCode, usize> {
        let mut counts: BTreeMap<DomainCode, usize> =
            DomainCode::ALL.into_iter().map(|d| (d, 0)).collect();
        for rec in self.entries.values() {
            *counts.entry(rec.domain).or_default() += 1;
        }
        counts
    }

    /// Fills `domain` on items that lack one.
    pub fn apply(&self, items: &mut [McqItem]) {
        for item in items.iter_mut().filter(|i| i.domain.is_none()) {
            item.domain = self.get(&item.id);
        }
    }
}

pub fn write_distribution_csv(cache: &DomainLabelCache, path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["domain", "count"])?;
    for (d, n) in cache.distribution() {
        w.write_record([d.as_str(), &n.to_string()])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LabelingReport {
    pub cache: DomainLabelCache,
    /// Classifier-backed labels added in this run.
    pub classified: usize,
    pub failures: Vec<LabelFailure>,
}

/// Labels every item not yet in the cache at `cache_path`.
///
/// Items that already carry a domain are recorded with source `file`
/// without a classifier call. New records are appended one line at a time
/// by a single writer, so an interrupted run leaves earlier lines intact.
pub fn label_dataset(
    items: &[McqItem],
    classifier: &dyn ChatClient,
    params: &GenerationParams,
    cache_path: &Path,
    parallel: usize,
) -> Result<LabelingReport, RoutingError> {
    let io_err = |source| RoutingError::Io {
        path: cache_path.display().to_string(),
        source,
    };
    let mut cache = DomainLabelCache::load(cache_path)?;
    let mut out = jsonl::open_append(cache_path).map_err(io_err)?;
    let mut append = |cache: &mut DomainLabelCache, rec: LabelRecord| -> Result<(), RoutingError> {
        jsonl::append_line(&mut out, &rec).map_err(io_err)?;
        cache.insert(rec);
        Ok(())
    };

    let mut pending = Vec::new();
    let unlabeled: Vec<&McqItem> = items.iter().filter(|i| !cache.contains(&i.id)).collect();
    for item in unlabeled {
        match item.domain {
            Some(domain) => append(
                &mut cache,
                LabelRecord {
                    id: item.id.clone(),
                    domain,
                    source: LabelSource::File,
                },
            )?,
            None => pending.push(item),
        }
    }

    let mut classified = 0;
    let mut failures = Vec::new();
    let mut write_error = None;
    run_bounded(
        &pending,
        parallel,
        |_, item| classify_domain(item, classifier, params),
        |i, result| match result {
            Ok(domain) if write_error.is_none() => {
                let rec = LabelRecord {
                    id: pending[i].id.clone(),
                    domain,
                    source: LabelSource::Classifier,
                };
                match append(&mut cache, rec) {
                    Ok(()) => classified += 1,
                    Err(e) => write_error = Some(e),
                }
            }
            Ok(_) => {}
            Err(e) => failures.push(LabelFailure {
                id: pending[i].id.clone(),
                reason: e.to_string(),
            }),
        },
    );
    if let Some(e) = write_error {
        return Err(e);
    }
    // Report failures in dataset order regardless of completion order.
    let order: BTreeMap<&str, usize> = items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.id.as_str(), i))
        .collect();
    failures.sort_by_key(|f| order.get(f.id.as_str()).copied());

    Ok(LabelingReport {
        cache,
        classified,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AnswerLetter;
    use crate::inference::FixedResponseMock;
    use std::fs;

    fn item(id: &str, q: &str) -> McqItem {
        McqItem {
            id: id.into(),
            question: q.into(),
            gold: AnswerLetter::A,
            domain: None,
        }
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_domain_code("Port.Manage.").unwrap(),
            DomainCode::PortManage
        );
        assert_eq!(
            parse_domain_code("  Ethics \n").unwrap(),
            DomainCode::Ethics
        );
        assert_eq!(parse_domain_code("Ethics.").unwrap(), DomainCode::Ethics);
        assert!(matches!(
            parse_domain_code("Portfolio Management"),
            Err(RoutingError::UnrecognizedCode(_))
        ));
        assert!(parse_domain_code("ethics").is_err());
        assert!(parse_domain_code("").is_err());
        assert!(parse_domain_code("...").is_err());
    }

    #[test]
    fn parse_inverts_display() {
        for d in DomainCode::ALL {
            assert_eq!(parse_domain_code(&d.to_string()).unwrap(), d);
        }
    }

    #[test]
    fn instruction_lists_every_code() {
        for d in DomainCode::ALL {
            assert!(
                CLASSIFY_SYSTEM_INSTRUCTION.contains(&format!("Category code: {d}\n")),
                "{d}"
            );
        }
        assert!(CLASSIFY_SYSTEM_INSTRUCTION.starts_with("You are a CFA expert."));
    }

    #[test]
    fn rule_based_examples() {
        let c = RuleBasedClassifier;
        let q = item(
            "1",
            "A bond has a modified duration of 7.2 and convexity of 65. Estimate the price change.",
        );
        assert_eq!(
            classify_domain(&q, &c, &classifier_params("mock")).unwrap(),
            DomainCode::FixedIncome
        );
        assert_eq!(
            c.classify_text("A hedge fund invests in commodities"),
            Some(DomainCode::AlterInvest)
        );
        assert_eq!(c.classify_text("nothing relevant here"), None);
    }

    #[test]
    fn verbatim_code_reply() {
        let c = FixedResponseMock::new("Economics");
        let got = classify_domain(&item("1", "q"), &c, &classifier_params("m")).unwrap();
        assert_eq!(got, DomainCode::Economics);
    }

    #[test]
    fn chatty_reply_fails_after_retry() {
        let c = FixedResponseMock::new("I think it is Ethics");
        let err = classify_domain(&item("7", "q"), &c, &classifier_params("m")).unwrap_err();
        assert!(matches!(err, RoutingError::ClassificationFailed { ref id, .. } if id == "7"));
    }

    #[test]
    fn cache_skips_torn_lines_and_keeps_last() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        fs::write(
            &path,
            "{\"id\":\"a\",\"domain\":\"Ethics\",\"source\":\"manual\"}\n{\"id\":\"a\",\"domain\":\"Derivatives\",\"source\":\"manual\"}\n{\"id\":\"b\",\"dom",
        )
        .unwrap();
        let cache = DomainLabelCache::load(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get("a"), Some(DomainCode::Derivatives));
    }

    #[test]
    fn missing_cache_file_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(DomainLabelCache::load(&dir.path().join("none.jsonl"))
            .unwrap()
            .is_empty());
    }
}
