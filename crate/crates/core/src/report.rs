//! Markdown and CSV report tables.
//!
//! Accuracy tables put prompts in rows and models in columns. Every
//! non-baseline cell carries its signed change against the baseline prompt
//! (`80.52 (↑17.34)`) and the best prompt per model is bolded. Token tables
//! use the same layout with the lowest average bolded. Output depends only on
//! the inputs, so identical artifacts give byte-identical reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::costsim::TokenTable;
use crate::domain::DomainCode;
use crate::evaluation::{
    aggregate, format_with_delta, read_results_jsonl, round2, ItemResult, RunSummary,
};
use crate::prompting::{FinCotMode, PromptStrategy};
use crate::stats::{
    domain_improvement_metrics, paired_bootstrap, BootstrapConfig, BootstrapResult, StatsError,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("model {model:?} has no {baseline} run to compare against")]
    MissingBaseline { model: String, baseline: String },
    #[error("no runs found")]
    NoRuns,
    #[error("runs for {model:?} cover different items ({left} vs {right})")]
    MismatchedItems {
        model: String,
        left: String,
        right: String,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Display order: the four main prompts, routed FinCoT, then the domain sweep.
pub fn strategy_rank(s: PromptStrategy) -> usize {
    match s {
        PromptStrategy::Sp => 0,
        PromptStrategy::UstCot => 1,
        PromptStrategy::StCot => 2,
        PromptStrategy::FinCot(FinCotMode::AllBlueprints) => 3,
        PromptStrategy::FinCot(FinCotMode::Routed) => 4,
        PromptStrategy::FinCot(FinCotMode::SingleDomain(d)) => {
            5 + DomainCode::BLUEPRINTED
                .iter()
                .position(|&b| b == d)
                .unwrap_or(DomainCode::BLUEPRINTED.len())
        }
    }
}

/// Scored runs of one model, keyed by strategy.
#[derive(Debug, Clone)]
pub struct ModelRuns {
    pub model: String,
    pub runs: BTreeMap<usize, (PromptStrategy, Vec<ItemResult>)>,
}

impl ModelRuns {
    fn strategies(&self) -> impl Iterator<Item = PromptStrategy> + '_ {
        self.runs.values().map(|(s, _)| *s)
    }

    fn results(&self, s: PromptStrategy) -> Option<&[ItemResult]> {
        self.runs.get(&strategy_rank(s)).map(|(_, r)| r.as_slice())
    }
}

/// Groups runs by model, models in first-appearance order.
pub fn group_runs(runs: Vec<Vec<ItemResult>>) -> Vec<ModelRuns> {
    let mut out: Vec<ModelRuns> = Vec::new();
    for results in runs.into_iter().filter(|r| !r.is_empty()) {
        let (model, strategy) = (results[0].model.clone(), results[0].strategy);
        let idx = match out.iter().position(|m| m.model == model) {
            Some(i) => i,
            None => {
                out.push(ModelRuns {
                    model,
                    runs: BTreeMap::new(),
                });
                out.len() - 1
            }
        };
        out[idx]
            .runs
            .insert(strategy_rank(strategy), (strategy, results));
    }
    out
}

/// Reads every `<strategy>.jsonl` in each run directory. A directory holding
/// a `runs/` folder is expanded to its model subdirectories.
pub fn load_run_dirs(dirs: &[PathBuf]) -> Result<Vec<Vec<ItemResult>>, ReportError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    let mut expanded = Vec::new();
    for dir in dirs {
        let nested = dir.join("runs");
        if nested.is_dir() {
            let mut subs: Vec<PathBuf> = fs::read_dir(&nested)
                .map_err(io_err(&nested))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            subs.sort();
            expanded.extend(subs);
        } else {
            expanded.push(dir.clone());
        }
    }
    let mut runs = Vec::new();
    for dir in expanded {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|e| e == "jsonl")
                    && p.file_stem()
                        .and_then(|s| s.to_str())
                        .is_some_and(|s| s.parse::<PromptStrategy>().is_ok())
            })
            .collect();
        files.sort();
        for f in files {
            runs.push(read_results_jsonl(&f).map_err(io_err(&f))?);
        }
    }
    if runs.iter().all(Vec::is_empty) {
        return Err(ReportError::NoRuns);
    }
    Ok(runs)
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub baseline: PromptStrategy,
    /// Adds the paired-bootstrap significance table when set.
    pub bootstrap: Option<BootstrapConfig>,
    pub improvement_threshold_pp: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            baseline: PromptStrategy::Sp,
            bootstrap: None,
            improvement_threshold_pp: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub markdown: String,
    pub accuracy_csv: String,
    pub domain_csv: String,
    pub tokens_csv: String,
    pub significance_csv: Option<String>,
}

impl Report {
    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        let files = [
            ("report.md", Some(&self.markdown)),
            ("accuracy.csv", Some(&self.accuracy_csv)),
            ("domains.csv", Some(&self.domain_csv)),
            ("tokens.csv", Some(&self.tokens_csv)),
            ("significance.csv", self.significance_csv.as_ref()),
        ];
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for (name, body) in files {
            if let Some(body) = body {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|source| ReportError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        Ok(())
    }
}

/// One comparison row of the significance table. `delta_pp` is
/// baseline minus comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub model: String,
    pub baseline: PromptStrategy,
    pub comparison: PromptStrategy,
    pub result: BootstrapResult,
}

pub fn build_report(models: &[ModelRuns], opts: &ReportOptions) -> Result<Report, ReportError> {
    if models.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let summaries: Vec<BTreeMap<usize, RunSummary>> = models
        .iter()
        .map(|m| {
            m.runs
                .iter()
                .map(|(&rank, (_, results))| aggregate(results).map(|s| (rank, s)))
                .collect::<Result<_, _>>()
                .expect("grouped runs are non-empty and homogeneous")
        })
        .collect();

    let strategies: BTreeSet<usize> = summaries.iter().flat_map(|m| m.keys().copied()).collect();
    let with_deltas = strategies.len() > 1;
    let base_rank = strategy_rank(opts.baseline);
    if with_deltas {
        if let Some(m) = models
            .iter()
            .zip(&summaries)
            .find(|(_, s)| !s.contains_key(&base_rank))
        {
            return Err(ReportError::MissingBaseline {
                model: m.0.model.clone(),
                baseline: opts.baseline.label(),
            });
        }
    }
    let labels: BTreeMap<usize, PromptStrategy> = models
        .iter()
        .flat_map(|m| m.strategies())
        .map(|s| (strategy_rank(s), s))
        .collect();

    let mut md = String::new();
    let mut acc_csv = csv_writer();
    acc_csv.write_record([
        "model",
        "strategy",
        "prompt",
        "n",
        "accuracy_pct",
        "delta_pp",
        "best",
    ])?;

    md.push_str("## Accuracy (%)\n\n");
    md.push_str(&header_row(
        "Prompt",
        models.iter().map(|m| m.model.as_str()),
    ));
    for (&rank, strategy) in &labels {
        let mut cells = vec![strategy.label()];
        for (m, sums) in models.iter().zip(&summaries) {
            let Some(s) = sums.get(&rank) else {
                cells.push("-".into());
                continue;
            };
            let best = sums
                .values()
                .map(|x| round2(x.accuracy_pct))
                .fold(f64::MIN, f64::max);
            let is_best = round2(s.accuracy_pct) == best;
            let delta = (with_deltas && rank != base_rank)
                .then(|| s.accuracy_pct - sums[&base_rank].accuracy_pct);
            let value = match delta {
                Some(d) => format_with_delta(s.accuracy_pct, d),
                None => format!("{:.2}", s.accuracy_pct),
            };
            cells.push(if is_best {
                bold_leading_number(&value)
            } else {
                value
            });
            acc_csv.write_record([
                m.model.clone(),
                strategy.key(),
                strategy.label(),
                s.n.to_string(),
                format!("{:.2}", s.accuracy_pct),
                delta.map(|d| format!("{d:.2}")).unwrap_or_default(),
                is_best.to_string(),
            ])?;
        }
        md.push_str(&table_row(&cells));
    }

    let mut dom_csv = csv_writer();
    dom_csv.write_record([
        "model",
        "strategy",
        "domain",
        "n",
        "accuracy_pct",
        "delta_pp",
    ])?;
    for (m, sums) in models.iter().zip(&summaries) {
        let domains: BTreeSet<DomainCode> = sums
            .values()
            .flat_map(|s| s.per_domain.keys().copied())
            .collect();
        if domains.is_empty() {
            continue;
        }
        let _ = write!(md, "\n## Per-domain accuracy (%): {}\n\n", m.model);
        md.push_str(&header_row(
            "Domain",
            sums.values()
                .map(|s| s.strategy.label())
                .collect::<Vec<_>>()
                .iter()
                .map(String::as_str),
        ));
        for d in &domains {
            let mut cells = vec![d.to_string()];
            for s in sums.values() {
                let Some(b) = s.per_domain.get(d) else {
                    cells.push("-".into());
                    continue;
                };
                let base = sums.get(&base_rank).and_then(|x| x.per_domain.get(d));
                let delta = base
                    .filter(|_| with_deltas && strategy_rank(s.strategy) != base_rank)
                    .map(|bb| b.accuracy_pct - bb.accuracy_pct);
                cells.push(match delta {
                    Some(dl) => format_with_delta(b.accuracy_pct, dl),
                    None => format!("{:.2}", b.accuracy_pct),
                });
                dom_csv.write_record([
                    m.model.clone(),
                    s.strategy.key(),
                    d.to_string(),
                    b.n.to_string(),
                    format!("{:.2}", b.accuracy_pct),
                    delta.map(|x| format!("{x:.2}")).unwrap_or_default(),
                ])?;
            }
            md.push_str(&table_row(&cells));
        }
        if with_deltas {
            let base = &sums[&base_rank];
            let mut lines = Vec::new();
            for s in sums
                .values()
                .filter(|s| strategy_rank(s.strategy) != base_rank)
            {
                if let Ok(imp) = domain_improvement_metrics(s, base, opts.improvement_threshold_pp)
                {
                    lines.push(format!(
                        "- {}: {:.0}% of domains improve by at least {:.1} pp over {}; mean domain gain {:+.2} pp\n",
                        s.strategy.label(),
                        100.0 * imp.proportion,
                        opts.improvement_threshold_pp,
                        opts.baseline.label(),
                        imp.mean_gain_pp
                    ));
                }
            }
            if !lines.is_empty() {
                md.push('\n');
                lines.iter().for_each(|l| md.push_str(l));
            }
        }
    }

    let grid = TokenGrid::from_summaries(models, &summaries, &labels);
    md.push('\n');
    md.push_str(&grid.markdown());

    let significance_csv = match &opts.bootstrap {
        Some(cfg) => {
            let rows = significance_rows(models, cfg)?;
            md.push('\n');
            md.push_str(&significance_markdown(&rows));
            Some(significance_csv(&rows)?)
        }
        None => None,
    };

    Ok(Report {
        markdown: md,
        accuracy_csv: finish(acc_csv)?,
        domain_csv: finish(dom_csv)?,
        tokens_csv: grid.csv()?,
        significance_csv,
    })
}

/// Every pair of main prompts present for a model, earlier prompt as the
/// baseline, aligned by item id.
pub fn significance_rows(
    models: &[ModelRuns],
    cfg: &BootstrapConfig,
) -> Result<Vec<SignificanceRow>, ReportError> {
    let mut rows = Vec::new();
    for m in models {
        let present: Vec<PromptStrategy> = PromptStrategy::MAIN
            .into_iter()
            .filter(|s| m.results(*s).is_some())
            .collect();
        for (i, &base) in present.iter().enumerate() {
            for &cmp in &present[i + 1..] {
                let (a, b) = align(&m.model, m.results(base).unwrap(), m.results(cmp).unwrap())?;
                rows.push(SignificanceRow {
                    model: m.model.clone(),
                    baseline: base,
                    comparison: cmp,
                    result: paired_bootstrap(&a, &b, cfg)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Correctness vectors of two runs paired by item id.
pub fn align(
    model: &str,
    left: &[ItemResult],
    right: &[ItemResult],
) -> Result<(Vec<bool>, Vec<bool>), ReportError> {
    let right_by_id: BTreeMap<&str, bool> =
        right.iter().map(|r| (r.id.as_str(), r.correct)).collect();
    let mismatch = || ReportError::MismatchedItems {
        model: model.to_string(),
        left: format!(
            "{} items in {}",
            left.len(),
            left.first().map(|r| r.strategy.key()).unwrap_or_default()
        ),
        right: format!(
            "{} items in {}",
            right.len(),
            right.first().map(|r| r.strategy.key()).unwrap_or_default()
        ),
    };
    if left.len() != right.len() {
        return Err(mismatch());
    }
    let mut a = Vec::with_capacity(left.len());
    let mut b = Vec::with_capacity(left.len());
    for r in left {
        a.push(r.correct);
        b.push(*right_by_id.get(r.id.as_str()).ok_or_else(mismatch)?);
    }
    Ok((a, b))
}

pub fn significance_markdown(rows: &[SignificanceRow]) -> String {
    let mut md = String::from("## Paired bootstrap significance\n\n");
    md.push_str(&header_row(
        "Model",
        [
            "Baseline",
            "Comparison",
            "Δ (pp)",
            "95% CI (pp)",
            "p-value",
            "Significant",
        ]
        .into_iter(),
    ));
    for r in rows {
        md.push_str(&table_row(&[
            r.model.clone(),
            r.baseline.label(),
            r.comparison.label(),
            format!("{:.2}", r.result.delta_pp),
            format!("[{:.2}, {:.2}]", r.result.ci_low_pp, r.result.ci_high_pp),
            format!("{:.4}", r.result.p_value),
            if r.result.significant { "yes" } else { "no" }.into(),
        ]));
    }
    md
}

pub fn significance_csv(rows: &[SignificanceRow]) -> Result<String, ReportError> {
    let mut w = csv_writer();
    w.write_record([
        "model",
        "baseline",
        "comparison",
        "delta_pp",
        "ci_low_pp",
        "ci_high_pp",
        "p_value",
        "significant",
    ])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.baseline.key(),
            r.comparison.key(),
            format!("{:.2}", r.result.delta_pp),
            format!("{:.2}", r.result.ci_low_pp),
            format!("{:.2}", r.result.ci_high_pp),
            format!("{:.4}", r.result.p_value),
            r.result.significant.to_string(),
        ])?;
    }
    finish(w)
}

/// Average input/output tokens (thousands) per prompt and model.
/// `(strategy key, prompt label, per-model (input_k, output_k))`.
pub type TokenRow = (String, String, Vec<Option<(f64, f64)>>);

#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid {
    pub models: Vec<String>,
    pub rows: Vec<TokenRow>,
}

impl TokenGrid {
    fn from_summaries(
        models: &[ModelRuns],
        summaries: &[BTreeMap<usize, RunSummary>],
        labels: &BTreeMap<usize, PromptStrategy>,
    ) -> Self {
        let rows = labels
            .iter()
            .map(|(rank, s)| {
                let cells = summaries
                    .iter()
                    .map(|m| m.get(rank).map(|x| (x.avg_input_k, x.avg_output_k)))
                    .collect();
                (s.key(), s.label(), cells)
            })
            .collect();
        TokenGrid {
            models: models.iter().map(|m| m.model.clone()).collect(),
            rows,
        }
    }

    /// Layout of a shipped token table: rows in file order, labels verbatim.
    pub fn from_table(table: &TokenTable) -> Self {
        let models: Vec<String> = table.models().into_iter().map(String::from).collect();
        let mut rows: Vec<TokenRow> = Vec::new();
        for r in table.rows() {
            let col = models
                .iter()
                .position(|m| *m == r.model)
                .expect("model listed");
            let idx = match rows.iter().position(|(k, _, _)| *k == r.strategy) {
                Some(i) => i,
                None => {
                    rows.push((
                        r.strategy.clone(),
                        r.prompt.clone(),
                        vec![None; models.len()],
                    ));
                    rows.len() - 1
                }
            };
            rows[idx].2[col] = Some((r.input_k, r.output_k));
        }
        TokenGrid { models, rows }
    }

    pub fn markdown(&self) -> String {
        let mut md = String::new();
        for (title, pick) in [
            ("Average Input Tokens (k)", 0usize),
            ("Average Output Tokens (k)", 1),
        ] {
            let _ = write!(md, "## {title}\n\n");
            md.push_str(&header_row(
                "Prompt",
                self.models.iter().map(String::as_str),
            ));
            let value = |c: &Option<(f64, f64)>| c.map(|(i, o)| if pick == 0 { i } else { o });
            let mins: Vec<Option<f64>> = (0..self.models.len())
                .map(|col| {
                    self.rows
                        .iter()
                        .filter_map(|(_, _, cells)| value(&cells[col]).map(round2))
                        .reduce(f64::min)
                })
                .collect();
            for (_, label, cells) in &self.rows {
                let mut out = vec![label.clone()];
                for (col, c) in cells.iter().enumerate() {
                    out.push(match value(c) {
                        Some(v) if Some(round2(v)) == mins[col] => format!("**{v:.2}**"),
                        Some(v) => format!("{v:.2}"),
                        None => "-".into(),
                    });
                }
                md.push_str(&table_row(&out));
            }
            md.push('\n');
        }
        md
    }

    pub fn csv(&self) -> Result<String, ReportError> {
        let mut w = csv_writer();
        w.write_record(["model", "strategy", "prompt", "input_k", "output_k"])?;
        for (col, model) in self.models.iter().enumerate() {
            for (key, label, cells) in &self.rows {
                if let Some((i, o)) = cells[col] {
                    w.write_record([
                        model.clone(),
                        key.clone(),
                        label.clone(),
                        format!("{i:.2}"),
                        format!("{o:.2}"),
                    ])?;
                }
            }
        }
        finish(w)
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| ReportError::Io {
        path: "<memory>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn header_row<'a>(first: &str, rest: impl Iterator<Item = &'a str>) -> String {
    let cols: Vec<String> = std::iter::once(first.to_string())
        .chain(rest.map(String::from))
        .collect();
    let mut s = table_row(&cols);
    s.push('|');
    for (i, _) in cols.iter().enumerate() {
        s.push_str(if i == 0 { " --- |" } else { " ---: |" });
    }
    s.push('\n');
    s
}

fn table_row(cells: &[String]) -> String {
    let mut s = String::from("|");
    for c in cells {
        let _ = write!(s, " {} |", c.replace('|', "\\|"));
    }
    s.push('\n');
    s
}

/// `80.52 (↑17.34)` becomes `**80.52** (↑17.34)`.
fn bold_leading_number(cell: &str) -> String {
    match cell.split_once(' ') {
        Some((num, rest)) => format!("**{num}** {rest}"),
        None => format!("**{cell}**"),
    }
}
