//! Batch runs: assemble, complete, cache, extract, score.
//!
//! Every raw response is appended to a JSONL cache before scoring. A rerun
//! with the same cache skips (item, strategy, model) triples already present,
//! so an interrupted run resumes where it stopped. Duplicate cache keys
//! resolve last-write-wins at load time.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::evaluation::{
    aggregate, write_results_jsonl, write_summary_csv, ItemResult, RunSummary,
};
use crate::extraction::extract_answer;
use crate::inference::{
    ChatClient, GenerationParams, ModelResponse, UsageSource, DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
};
use crate::jsonl;
use crate::pool::run_bounded;
use crate::prompting::{AssembledPrompt, McqItem, PromptAssembler, PromptStrategy};

pub const DEFAULT_PARALLEL: usize = 4;
pub const DEFAULT_TIMEOUT_S: u64 = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}
fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_S
}
fn default_parallel() -> usize {
    DEFAULT_PARALLEL
}
fn default_blueprints() -> PathBuf {
    PathBuf::from("blueprints")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_blueprints")]
    pub blueprints: PathBuf,
    /// Domain labels produced by `classify`; required for routed FinCoT.
    #[serde(default)]
    pub label_cache: Option<PathBuf>,
    pub strategies: Vec<PromptStrategy>,
    pub model: ModelConfig,
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.strategies.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one strategy is required".into(),
            ));
        }
        if self.parallel == 0 {
            return Err(ConfigError::Invalid("parallel must be >= 1".into()));
        }
        if self.model.name.trim().is_empty() {
            return Err(ConfigError::Invalid("model name is empty".into()));
        }
        if !self.dataset.is_file() {
            return Err(ConfigError::Invalid(format!(
                "dataset not found: {}",
                self.dataset.display()
            )));
        }
        let needs_labels = self
            .strategies
            .iter()
            .any(|s| matches!(s.fincot_mode(), Some(crate::FinCotMode::Routed)));
        if needs_labels && self.label_cache.is_none() {
            return Err(ConfigError::Invalid(
                "routed FinCoT needs label_cache".into(),
            ));
        }
        self.params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn params(&self) -> GenerationParams {
        GenerationParams {
            model: self.model.name.clone(),
            temperature: self.model.temperature,
            max_tokens: self.model.max_tokens,
            seed: self.seed,
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        run_dir(&self.output_dir, &self.model.name)
    }

    pub fn cache_path(&self) -> PathBuf {
        self.output_dir.join("cache").join("responses.jsonl")
    }
}

/// `<output>/runs/<model>` with the model name made path-safe.
pub fn run_dir(output_dir: &Path, model: &str) -> PathBuf {
    let safe: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    output_dir.join("runs").join(safe)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseCacheRecord {
    pub id: String,
    pub strategy: PromptStrategy,
    pub model: String,
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub usage_source: UsageSource,
    pub latency_ms: u64,
    /// Unix seconds.
    pub timestamp: u64,
}

impl ResponseCacheRecord {
    fn key(&self) -> CacheKey {
        (self.id.clone(), self.strategy, self.model.clone())
    }

    fn response(&self) -> ModelResponse {
        ModelResponse {
            content: self.content.clone(),
            input_tokens: self.input_tokens,
            output_tokens: self.output_tokens,
            usage_source: self.usage_source,
            latency_ms: self.latency_ms,
        }
    }
}

type CacheKey = (String, PromptStrategy, String);

/// Cached responses keyed by (item id, strategy, model).
#[derive(Debug, Default)]
pub struct ResponseCache {
    records: HashMap<CacheKey, ResponseCacheRecord>,
}

impl ResponseCache {
    pub fn load(path: &Path) -> io::Result<Self> {
        let mut cache = ResponseCache::default();
        for rec in jsonl::read_records::<ResponseCacheRecord>(path)? {
            cache.insert(rec);
        }
        Ok(cache)
    }

    pub fn insert(&mut self, rec: ResponseCacheRecord) {
        self.records.insert(rec.key(), rec);
    }

    pub fn get(
        &self,
        id: &str,
        strategy: PromptStrategy,
        model: &str,
    ) -> Option<&ResponseCacheRecord> {
        self.records
            .get(&(id.to_string(), strategy, model.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub id: String,
    pub strategy: PromptStrategy,
    pub model: String,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    /// One per strategy that produced at least one scored item, in config order.
    pub summaries: Vec<RunSummary>,
    /// Scored items per strategy, in dataset order.
    pub results: Vec<(PromptStrategy, Vec<ItemResult>)>,
    pub new_requests: usize,
    pub reused: usize,
    /// Sorted by strategy order, then dataset order.
    pub failures: Vec<RunFailure>,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

struct Task<'a> {
    strategy_idx: usize,
    item_idx: usize,
    item: &'a McqItem,
    strategy: PromptStrategy,
    prompt: AssembledPrompt,
}

/// Runs every configured strategy over `items`.
///
/// Artifacts under [`RunConfig::run_dir`]: `<strategy>.jsonl` scored items,
/// `summary.csv`, and `failures.jsonl` when anything failed. Failed items
/// are reported, never dropped silently.
pub fn run(
    config: &RunConfig,
    items: &[McqItem],
    assembler: &PromptAssembler<'_>,
    client: &dyn ChatClient,
) -> Result<RunOutcome, RunError> {
    let params = config.params();
    let model = params.model.as_str();
    let cache_path = config.cache_path();
    let mut cache = ResponseCache::load(&cache_path).map_err(io_err(&cache_path))?;

    let mut failures: Vec<(usize, usize, RunFailure)> = Vec::new();
    let mut tasks = Vec::new();
    let mut reused = 0;
    for (si, &strategy) in config.strategies.iter().enumerate() {
        for (ii, item) in items.iter().enumerate() {
            if cache.get(&item.id, strategy, model).is_some() {
                reused += 1;
                continue;
            }
            match assembler.assemble(strategy, item) {
                Ok(prompt) => tasks.push(Task {
                    strategy_idx: si,
                    item_idx: ii,
                    item,
                    strategy,
                    prompt,
                }),
                Err(e) => failures.push((si, ii, failure(item, strategy, model, e.to_string()))),
            }
        }
    }

    tracing::info!(requests = tasks.len(), reused, "starting run");
    let mut writer = jsonl::open_append(&cache_path).map_err(io_err(&cache_path))?;
    let mut write_error = None;
    let new_requests = tasks.len();
    run_bounded(
        &tasks,
        config.parallel,
        |_, t| client.complete(&t.prompt.system, &t.prompt.user, &params),
        |i, result| {
            let t = &tasks[i];
            match result {
                Ok(resp) => {
                    let rec = ResponseCacheRecord {
                        id: t.item.id.clone(),
                        strategy: t.strategy,
                        model: model.to_string(),
                        content: resp.content,
                        input_tokens: resp.input_tokens,
                        output_tokens: resp.output_tokens,
                        usage_source: resp.usage_source,
                        latency_ms: resp.latency_ms,
                        timestamp: unix_now(),
                    };
                    if let Err(e) = jsonl::append_line(&mut writer, &rec) {
                        write_error.get_or_insert(e);
                    }
                    cache.insert(rec);
                }
                Err(e) => {
                    tracing::warn!(id = %t.item.id, strategy = %t.strategy, "request failed: {e}");
                    failures.push((
                        t.strategy_idx,
                        t.item_idx,
                        failure(t.item, t.strategy, model, e.to_string()),
                    ));
                }
            }
        },
    );
    if let Some(e) = write_error {
        return Err(io_err(&cache_path)(e));
    }

    failures.sort_by_key(|(si, ii, _)| (*si, *ii));
    let failures: Vec<RunFailure> = failures.into_iter().map(|(_, _, f)| f).collect();

    let dir = config.run_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut outcome = RunOutcome {
        new_requests,
        reused,
        failures,
        ..RunOutcome::default()
    };
    for &strategy in &config.strategies {
        let results: Vec<ItemResult> = items
            .iter()
            .filter_map(|item| {
                let rec = cache.get(&item.id, strategy, model)?;
                let resp = rec.response();
                Some(crate::evaluation::score_item(
                    item,
                    &extract_answer(&resp.content),
                    &resp,
                    strategy,
                    model,
                ))
            })
            .collect();
        let path = dir.join(format!("{}.jsonl", strategy.key()));
        write_results_jsonl(&path, &results).map_err(io_err(&path))?;
        if let Ok(summary) = aggregate(&results) {
            outcome.summaries.push(summary);
        }
        outcome.results.push((strategy, results));
    }

    let summary_path = dir.join("summary.csv");
    write_summary_csv(&summary_path, &outcome.summaries).map_err(io_err(&summary_path))?;
    let manifest = dir.join("failures.jsonl");
    if outcome.failures.is_empty() {
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(io_err(&manifest))?;
        }
    } else {
        jsonl::write_records(&manifest, &outcome.failures).map_err(io_err(&manifest))?;
    }
    Ok(outcome)
}

fn failure(item: &McqItem, strategy: PromptStrategy, model: &str, error: String) -> RunFailure {
    RunFailure {
        id: item.id.clone(),
        strategy,
        model: model.to_string(),
        error,
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
