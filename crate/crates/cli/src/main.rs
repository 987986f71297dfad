use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "fincot",
    version,
    about = "Structured financial chain-of-thought evaluation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run prompting strategies over a dataset, resuming from the response cache.
    Run(RunArgs),
    /// Label dataset items with one of the ten domain codes.
    Classify(ClassifyArgs),
    /// Paired significance tests between runs.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Cost-efficiency curves from token tables and provider prices.
    Simulate(SimulateArgs),
    /// Accuracy, per-domain and token tables from completed runs.
    Report(ReportArgs),
    /// Blueprint maintenance.
    Blueprint {
        #[command(subcommand)]
        command: BlueprintCommand,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Paired bootstrap of run A against run B (delta = A - B).
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum BlueprintCommand {
    /// Parse and validate every blueprint file.
    Lint {
        #[arg(long, default_value = "blueprints")]
        blueprints: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MockKind {
    /// Answers every question correctly.
    AnswerKey,
    /// Seeded uniform choice among A, B and C.
    Random,
    /// Keyword rules; classification only.
    Rules,
}

#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    /// Model identifier sent to the endpoint.
    #[arg(long)]
    pub model: Option<String>,
    /// Base URL of an OpenAI-compatible server; the key is read from API_KEY.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Sampling temperature [default: 0.2; 0 for classify].
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Cap on generated tokens [default: 16384].
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Per-request timeout in seconds [default: 600].
    #[arg(long)]
    pub timeout_s: Option<u64>,
    /// Offline backend instead of HTTP.
    #[arg(long, value_enum)]
    pub mock: Option<MockKind>,
    /// Worker count for concurrent requests.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Sampling seed; also seeds the random mock.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Multiple-choice questions, one JSON object per line.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory of `.mmd` blueprints [default: blueprints].
    #[arg(long)]
    pub blueprints: Option<PathBuf>,
    /// Output directory for caches and run artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Domain labels from `classify`, needed by routed FinCoT.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Comma-separated strategy keys (sp, ust_cot, st_cot, fincot_all, ...).
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<String>,
    /// FinCoT variant: a domain code, `all`, `routed`, or `sweep` for all nine single-domain prompts.
    #[arg(long)]
    pub fincot_domain: Option<String>,
    /// Directory with alternative prompt templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// Multiple-choice questions, one JSON object per line.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Label cache (JSONL); existing labels are kept.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the domain distribution as CSV.
    #[arg(long)]
    pub distribution: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Scored results (JSONL) of the baseline run.
    #[arg(long)]
    pub a: PathBuf,
    /// Scored results (JSONL) of the comparison run.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Clamp the two-sided p-value at 1.
    #[arg(long)]
    pub clamp_p: bool,
    /// Write the result row as CSV here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value = "fixtures/pricing.toml")]
    pub pricing: PathBuf,
    /// Pricing profile names; all profiles when omitted.
    #[arg(long)]
    pub profile: Vec<String>,
    #[arg(long, default_value = "fixtures/tables/token_tables.csv")]
    pub fixtures: PathBuf,
    /// Models to include; all models in the table when omitted.
    #[arg(long = "table-model")]
    pub models: Vec<String>,
    /// `baseline:candidate` strategy pairs. Defaults to sp, ust_cot and st_cot against fincot_all.
    #[arg(long)]
    pub pair: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directories, or output directories containing `runs/`.
    #[arg(long, required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "sp")]
    pub baseline: String,
    /// Add a paired-bootstrap significance table with this many resamples.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub clamp_p: bool,
    /// Also render a token table from a fixture CSV.
    #[arg(long)]
    pub token_fixtures: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Classify(args) => commands::classify(args),
        Command::Stats {
            command: StatsCommand::Compare(args),
        } => commands::compare(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Report(args) => commands::report(args),
        Command::Blueprint {
            command: BlueprintCommand::Lint { blueprints },
        } => commands::lint(&blueprints),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
