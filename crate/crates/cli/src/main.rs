mod commands;
mod config;
mod endpoint;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

/// Urban knowledge data synthesis and evaluation pipeline.
#[derive(Parser)]
#[command(name = "urbanscope", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Canonical map JSONL (defaults to <out>/map.jsonl).
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// OpenAI-compatible base URL, or mock://echo-truth, mock://oracle,
    /// mock://fixed/<reply>, mock://random/<seed>.
    #[arg(long, global = true)]
    endpoint_url: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Few-shot exemplars per question (0, 1 or 5).
    #[arg(long, global = true)]
    shots: Option<usize>,
    #[arg(long, global = true)]
    max_in_flight: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import a map into canonical JSONL (or build a synthetic city).
    ImportMap {
        /// Build a seeded synthetic city with about this many entities.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Generate CityQA, CityWalk and CityReasoning instruction data.
    Synth,
    /// Generate the benchmark, exemplar pool and navigation suite.
    GenEval,
    /// Run the benchmark (and mobility tasks, when present) against a model.
    RunEval,
    /// Run the navigation suite against a model.
    Navigate,
    /// Compute SWFT sample weights from per-sample losses.
    SwftWeights {
        /// Loss JSONL (`id`, `base_loss`, `warm_loss`).
        #[arg(long)]
        losses: Option<PathBuf>,
        /// Instruction dataset to export with weights attached.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Aggregate results into CSV reports.
    Report {
        /// results.json files from run-eval (repeatable).
        #[arg(long)]
        results: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let flags = Overrides {
        map: cli.map,
        seed: cli.seed,
        out: cli.out,
        endpoint_url: cli.endpoint_url,
        model: cli.model,
        shots: cli.shots,
        max_in_flight: cli.max_in_flight,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &flags)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    }
    match cli.command {
        Command::ImportMap { synthetic } => commands::import_map(&cfg, synthetic),
        Command::Synth => commands::synth(&cfg),
        Command::GenEval => commands::gen_eval(&cfg),
        Command::RunEval => commands::run_eval(&cfg),
        Command::Navigate => commands::navigate(&cfg),
        Command::SwftWeights { losses, dataset } => commands::swft_weights(&cfg, losses, dataset),
        Command::Report { results } => commands::report(&cfg, results),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
