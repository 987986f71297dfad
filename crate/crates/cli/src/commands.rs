use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use fincot_core::blueprint::{load_registry, validate_blueprint, Blueprint};
use fincot_core::costsim::{
    break_even, combined_grid, efficiency_curve, find_profile, load_pricing, TokenTable,
};
use fincot_core::dataset::ingest_dataset;
use fincot_core::evaluation::read_results_jsonl;
use fincot_core::inference::{AnswerKeyMock, ChatClient, HttpChatClient, SeededRandomMock};
use fincot_core::pipeline::{self, ModelConfig, RunConfig, DEFAULT_PARALLEL, DEFAULT_TIMEOUT_S};
use fincot_core::prompting::{PromptAssembler, TemplateSet};
use fincot_core::report::{
    align, build_report, group_runs, load_run_dirs, ReportOptions, TokenGrid,
};
use fincot_core::routing::{
    classifier_params, label_dataset, write_distribution_csv, DomainLabelCache, RuleBasedClassifier,
};
use fincot_core::stats::{paired_bootstrap, BootstrapConfig};
use fincot_core::{DomainCode, FinCotMode, McqItem, PromptStrategy};

use crate::{ClassifyArgs, CompareArgs, MockKind, ModelArgs, ReportArgs, RunArgs, SimulateArgs};

/// Exit status when some items failed but artifacts were still written.
const PARTIAL_FAILURE: u8 = 2;

fn make_client(
    args: &ModelArgs,
    base_url: Option<&str>,
    timeout_s: u64,
    items: &[McqItem],
) -> Result<Box<dyn ChatClient>> {
    Ok(match args.mock {
        Some(MockKind::AnswerKey) => Box::new(AnswerKeyMock::new(items)),
        Some(MockKind::Random) => Box::new(SeededRandomMock::new(args.seed.unwrap_or(0))),
        Some(MockKind::Rules) => Box::new(RuleBasedClassifier),
        None => {
            let url = base_url.context(
                "--base-url (or model.base_url in the config) is required without --mock",
            )?;
            let key = std::env::var("API_KEY").ok().filter(|k| !k.is_empty());
            Box::new(HttpChatClient::new(
                url,
                key,
                Duration::from_secs(timeout_s),
            )?)
        }
    })
}

fn default_model_name(args: &ModelArgs) -> Result<String> {
    match (&args.model, args.mock) {
        (Some(m), _) => Ok(m.clone()),
        (None, Some(kind)) => Ok(format!("mock-{}", format!("{kind:?}").to_lowercase())),
        (None, None) => bail!("--model is required"),
    }
}

fn parse_domain_arg(s: &str) -> Result<DomainCode> {
    let d = s
        .parse::<DomainCode>()
        .ok()
        .or_else(|| DomainCode::from_slug(&s.to_ascii_lowercase()))
        .with_context(|| format!("unknown domain {s:?}"))?;
    if !d.has_blueprint() {
        bail!("{d} has no blueprint");
    }
    Ok(d)
}

/// Applies `--fincot-domain` to the strategy list.
fn apply_fincot_domain(strategies: &mut Vec<PromptStrategy>, choice: &str) -> Result<()> {
    let all = PromptStrategy::FinCot(FinCotMode::AllBlueprints);
    let replace_all = |list: &mut Vec<PromptStrategy>, with: PromptStrategy| match list
        .iter()
        .position(|s| *s == all)
    {
        Some(i) => list[i] = with,
        None if !list.contains(&with) => list.push(with),
        None => {}
    };
    match choice {
        "all" => {
            if !strategies.contains(&all) {
                strategies.push(all);
            }
        }
        "routed" => replace_all(strategies, PromptStrategy::FinCot(FinCotMode::Routed)),
        "sweep" => {
            for s in PromptStrategy::domain_sweep() {
                if !strategies.contains(&s) {
                    strategies.push(s);
                }
            }
        }
        code => replace_all(
            strategies,
            PromptStrategy::FinCot(FinCotMode::SingleDomain(parse_domain_arg(code)?)),
        ),
    }
    Ok(())
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig {
            dataset: args
                .dataset
                .clone()
                .context("--dataset is required without --config")?,
            blueprints: PathBuf::from("blueprints"),
            label_cache: None,
            strategies: PromptStrategy::MAIN.to_vec(),
            model: ModelConfig {
                name: default_model_name(&args.model)?,
                base_url: None,
                temperature: fincot_core::inference::DEFAULT_TEMPERATURE,
                max_tokens: fincot_core::inference::DEFAULT_MAX_TOKENS,
                timeout_s: DEFAULT_TIMEOUT_S,
            },
            parallel: DEFAULT_PARALLEL,
            output_dir: args
                .out
                .clone()
                .context("--out is required without --config")?,
            seed: None,
        },
    };
    let m = &args.model;
    if let Some(v) = &args.dataset {
        cfg.dataset = v.clone();
    }
    if let Some(v) = &args.blueprints {
        cfg.blueprints = v.clone();
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = &args.labels {
        cfg.label_cache = Some(v.clone());
    }
    if !args.strategies.is_empty() {
        cfg.strategies = args
            .strategies
            .iter()
            .map(|s| s.trim().parse::<PromptStrategy>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(choice) = &args.fincot_domain {
        apply_fincot_domain(&mut cfg.strategies, choice)?;
    }
    if let Some(v) = &m.model {
        cfg.model.name = v.clone();
    }
    if let Some(v) = &m.base_url {
        cfg.model.base_url = Some(v.clone());
    }
    if let Some(v) = m.temperature {
        cfg.model.temperature = v;
    }
    if let Some(v) = m.max_tokens {
        cfg.model.max_tokens = v;
    }
    if let Some(v) = m.timeout_s {
        cfg.model.timeout_s = v;
    }
    if let Some(v) = m.parallel {
        cfg.parallel = v;
    }
    if m.seed.is_some() {
        cfg.seed = m.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = build_run_config(&args)?;
    let mut items = ingest_dataset(&cfg.dataset)?;
    if let Some(path) = &cfg.label_cache {
        DomainLabelCache::load(path)?.apply(&mut items);
    }
    let registry = load_registry(&cfg.blueprints)
        .with_context(|| format!("loading blueprints from {}", cfg.blueprints.display()))?;
    if !registry.is_complete() {
        tracing::warn!(found = registry.len(), "blueprint registry is incomplete");
    }
    let templates = match &args.templates {
        Some(dir) => TemplateSet::load(dir)?,
        None => TemplateSet::builtin(),
    };
    let assembler = PromptAssembler::new(&templates, &registry);
    let mut client_args = args.model.clone();
    client_args.seed = cfg.seed.or(client_args.seed);
    let client = make_client(
        &client_args,
        cfg.model.base_url.as_deref(),
        cfg.model.timeout_s,
        &items,
    )?;

    let outcome = pipeline::run(&cfg, &items, &assembler, client.as_ref())?;
    println!("model,strategy,n,accuracy_pct,avg_input_k,avg_output_k");
    for s in &outcome.summaries {
        println!(
            "{},{},{},{:.2},{:.2},{:.2}",
            s.model,
            s.strategy.key(),
            s.n,
            s.accuracy_pct,
            s.avg_input_k,
            s.avg_output_k
        );
    }
    eprintln!(
        "{} new requests, {} reused from cache; artifacts in {}",
        outcome.new_requests,
        outcome.reused,
        cfg.run_dir().display()
    );
    if outcome.is_complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} item(s) failed; see {}",
            outcome.failures.len(),
            cfg.run_dir().join("failures.jsonl").display()
        );
        Ok(ExitCode::from(PARTIAL_FAILURE))
    }
}

pub fn classify(args: ClassifyArgs) -> Result<ExitCode> {
    let items = ingest_dataset(&args.dataset)?;
    let name = default_model_name(&args.model)?;
    let mut params = classifier_params(name);
    if let Some(t) = args.model.temperature {
        params.temperature = t;
    }
    if let Some(m) = args.model.max_tokens {
        params.max_tokens = m;
    }
    params.seed = args.model.seed;
    let client = make_client(
        &args.model,
        args.model.base_url.as_deref(),
        args.model.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S),
        &items,
    )?;
    let report = label_dataset(
        &items,
        client.as_ref(),
        &params,
        &args.out,
        args.model.parallel.unwrap_or(DEFAULT_PARALLEL),
    )?;
    println!("domain,count");
    for (d, n) in report.cache.distribution() {
        println!("{d},{n}");
    }
    if let Some(path) = &args.distribution {
        write_distribution_csv(&report.cache, path)?;
    }
    eprintln!(
        "{} newly classified, {} labels total",
        report.classified,
        report.cache.len()
    );
    if report.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &report.failures {
        eprintln!("unlabeled {}: {}", f.id, f.reason);
    }
    Ok(ExitCode::from(PARTIAL_FAILURE))
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    let read = |p: &Path| read_results_jsonl(p).with_context(|| format!("reading {}", p.display()));
    let (a, b) = (read(&args.a)?, read(&args.b)?);
    let (Some(fa), Some(fb)) = (a.first(), b.first()) else {
        bail!("both runs must contain scored items");
    };
    let (va, vb) = align(&fa.model, &a, &b)?;
    let cfg = BootstrapConfig {
        resamples: args.bootstrap,
        seed: args.seed,
        clamp_p: args.clamp_p,
        ..BootstrapConfig::default()
    };
    let r = paired_bootstrap(&va, &vb, &cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "baseline",
        "comparison",
        "n",
        "delta_pp",
        "ci_low_pp",
        "ci_high_pp",
        "p_value",
        "significant",
    ])?;
    w.write_record([
        fa.model.clone(),
        fa.strategy.key(),
        fb.strategy.key(),
        va.len().to_string(),
        format!("{:.2}", r.delta_pp),
        format!("{:.2}", r.ci_low_pp),
        format!("{:.2}", r.ci_high_pp),
        format!("{:.4}", r.p_value),
        r.significant.to_string(),
    ])?;
    let text = String::from_utf8(w.into_inner()?)?;
    print!("{text}");
    if let Some(out) = &args.out {
        write_file(out, &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let all = load_pricing(&args.pricing)?;
    let profiles = if args.profile.is_empty() {
        all.clone()
    } else {
        args.profile
            .iter()
            .map(|n| find_profile(&all, n).cloned())
            .collect::<Result<Vec<_>, _>>()?
    };
    let grid = combined_grid(&profiles)?;
    let table = TokenTable::load(&args.fixtures)?;
    let models: Vec<String> = if args.models.is_empty() {
        table.models().into_iter().map(String::from).collect()
    } else {
        args.models.clone()
    };
    let pairs: Vec<(String, String)> = if args.pair.is_empty() {
        ["sp", "ust_cot", "st_cot"]
            .iter()
            .map(|b| (b.to_string(), "fincot_all".to_string()))
            .collect()
    } else {
        args.pair
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(b, c)| (b.trim().to_string(), c.trim().to_string()))
                    .with_context(|| format!("pair {p:?} is not baseline:candidate"))
            })
            .collect::<Result<_>>()?
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "baseline",
        "candidate",
        "r",
        "cost_baseline",
        "cost_candidate",
        "efficiency",
    ])?;
    println!("model,baseline,candidate,break_even_r,dominated");
    for model in &models {
        for (base, cand) in &pairs {
            let (pb, pc) = (table.profile(model, base)?, table.profile(model, cand)?);
            for pt in efficiency_curve(pb, pc, &grid)? {
                w.write_record([
                    model.clone(),
                    base.clone(),
                    cand.clone(),
                    format!("{:.2}", pt.r),
                    format!("{:.4}", pt.cost_baseline),
                    format!("{:.4}", pt.cost_candidate),
                    format!("{:.4}", pt.efficiency),
                ])?;
            }
            match break_even(pb, pc) {
                Some(be) => println!("{model},{base},{cand},{:.4},{}", be.r, be.dominated),
                None => println!("{model},{base},{cand},,"),
            }
        }
    }
    let grid_text: Vec<String> = grid.iter().map(|r| format!("{r:.2}")).collect();
    eprintln!("price-ratio grid: {}", grid_text.join(", "));
    write_file(&args.out, &String::from_utf8(w.into_inner()?)?)?;
    Ok(ExitCode::SUCCESS)
}

pub fn report(args: ReportArgs) -> Result<ExitCode> {
    let runs = group_runs(load_run_dirs(&args.runs)?);
    let opts = ReportOptions {
        baseline: args.baseline.parse()?,
        bootstrap: args.bootstrap.map(|resamples| BootstrapConfig {
            resamples,
            seed: args.seed,
            clamp_p: args.clamp_p,
            ..BootstrapConfig::default()
        }),
        ..ReportOptions::default()
    };
    let report = build_report(&runs, &opts)?;
    report.write_to(&args.out)?;
    if let Some(path) = &args.token_fixtures {
        let grid = TokenGrid::from_table(&TokenTable::load(path)?);
        write_file(&args.out.join("tokens_fixture.md"), &grid.markdown())?;
        write_file(&args.out.join("tokens_fixture.csv"), &grid.csv()?)?;
    }
    eprintln!("report written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn lint(dir: &Path) -> Result<ExitCode> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mmd"))
        .collect();
    paths.sort();
    let mut failed = false;
    let mut seen: BTreeMap<DomainCode, PathBuf> = BTreeMap::new();
    for path in &paths {
        let text = fs::read_to_string(path)?;
        let bp = match Blueprint::from_file_text(&text) {
            Ok(bp) => bp,
            Err(e) => {
                println!("FAIL {}: {e}", path.display());
                failed = true;
                continue;
            }
        };
        let report = validate_blueprint(&bp);
        let status = if report.is_ok() { "ok" } else { "FAIL" };
        println!(
            "{status} {} [{}] {} nodes, {} edges",
            path.display(),
            bp.domain,
            bp.graph.node_count(),
            bp.graph.edge_count()
        );
        for e in &report.errors {
            println!("  error: {e}");
        }
        for w in &report.warnings {
            println!("  warning: {w}");
        }
        failed |= !report.is_ok();
        if let Some(first) = seen.insert(bp.domain, path.clone()) {
            println!(
                "  error: domain {} already defined in {}",
                bp.domain,
                first.display()
            );
            failed = true;
        }
    }
    let missing: Vec<String> = DomainCode::BLUEPRINTED
        .iter()
        .filter(|d| !seen.contains_key(d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        println!("missing blueprints: {}", missing.join(", "));
    }
    Ok(if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
