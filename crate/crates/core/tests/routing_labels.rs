use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use fincot_core::dataset::ingest_dataset;
use fincot_core::inference::{
    ChatClient, GenerationParams, InferenceError, ModelResponse, UsageSource,
};
use fincot_core::routing::{
    classifier_params, classify_domain, label_dataset, parse_domain_code, DomainLabelCache,
    LabelSource, RuleBasedClassifier, RETRY_SUFFIX,
};
use fincot_core::{DomainCode, McqItem};

fn sample() -> Vec<McqItem> {
    ingest_dataset(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/datasets/cfa_sample.jsonl"),
    )
    .unwrap()
}

struct Counting<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C: ChatClient> ChatClient for Counting<C> {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(system, user, params)
    }
}

/// Replies with chatter first, then a bare code once asked again.
struct Chatty;

impl ChatClient for Chatty {
    fn complete(
        &self,
        _system: &str,
        user: &str,
        _params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        let content = if user.ends_with(RETRY_SUFFIX) {
            " Derivatives. "
        } else {
            "I think it is about options."
        };
        Ok(ModelResponse {
            content: content.into(),
            input_tokens: 0,
            output_tokens: 0,
            usage_source: UsageSource::Approximate,
            latency_ms: 0,
        })
    }
}

#[test]
fn every_code_parses_and_near_misses_do_not() {
    for d in DomainCode::ALL {
        assert_eq!(parse_domain_code(d.as_str()).unwrap(), d);
        assert_eq!(
            parse_domain_code(&format!("  {}\n", d.as_str())).unwrap(),
            d
        );
    }
    for bad in [
        "",
        "economics",
        "Alternative Investments",
        "Economics and Ethics",
        "Unclassified",
    ] {
        assert!(parse_domain_code(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn retry_recovers_a_chatty_reply() {
    let item = &sample()[0];
    assert_eq!(
        classify_domain(item, &Chatty, &classifier_params("m")).unwrap(),
        DomainCode::Derivatives
    );
}

#[test]
fn labeling_is_cached_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("labels.jsonl");
    let gold = sample();
    let mut items = gold.clone();
    for it in &mut items {
        it.domain = None;
    }
    // Two items arrive pre-labeled and must not reach the classifier.
    items[0].domain = gold[0].domain;
    items[1].domain = gold[1].domain;

    let client = Counting {
        inner: RuleBasedClassifier,
        calls: AtomicUsize::new(0),
    };
    let report =
        label_dataset(&items, &client, &classifier_params("rules"), &cache_path, 4).unwrap();
    let calls = client.calls.load(Ordering::SeqCst);
    assert!((28..=56).contains(&calls), "{calls}");
    assert_eq!(report.classified + report.failures.len(), 28);
    assert_eq!(report.cache.len(), 30 - report.failures.len());
    let sources: Vec<LabelSource> = report.cache.records().take(2).map(|r| r.source).collect();
    assert_eq!(sources, [LabelSource::File, LabelSource::File]);

    // The keyword classifier is a stand-in; it only needs to beat chance (3/30) clearly.
    let correct = gold
        .iter()
        .filter(|g| report.cache.get(&g.id) == g.domain)
        .count();
    assert!(
        correct >= 12,
        "rule-based labels agree on only {correct}/30"
    );

    // A torn final line is ignored on reload and a rerun makes no new calls
    // for labeled items.
    let mut f = OpenOptions::new().append(true).open(&cache_path).unwrap();
    f.write_all(b"{\"id\": \"cfa-0").unwrap();
    drop(f);
    let reloaded = DomainLabelCache::load(&cache_path).unwrap();
    assert_eq!(reloaded, report.cache);

    let again = Counting {
        inner: RuleBasedClassifier,
        calls: AtomicUsize::new(0),
    };
    let rerun = label_dataset(&items, &again, &classifier_params("rules"), &cache_path, 2).unwrap();
    assert_eq!(rerun.classified, 0);
    assert_eq!(
        again.calls.load(Ordering::SeqCst),
        2 * report.failures.len()
    );
    assert_eq!(rerun.cache, report.cache);

    let dist = rerun.cache.distribution();
    assert_eq!(dist.len(), 10);
    assert_eq!(dist.values().sum::<usize>(), rerun.cache.len());

    let mut applied = items.clone();
    rerun.cache.apply(&mut applied);
    assert!(applied.iter().filter(|i| i.domain.is_some()).count() == rerun.cache.len());
    assert!(fs::read_to_string(&cache_path).unwrap().lines().count() >= rerun.cache.len());
}
