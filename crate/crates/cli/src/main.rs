//! `combtomo`: generate synthetic comb experiments, simulate their statistics,
//! reconstruct the comb–instrument–state set and report on the result.

mod commands;
mod config;
mod error;
mod formats;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};

use commands::{Context, InitSpec, Mode};
use config::ConfigDocument;

#[derive(Parser)]
#[command(name = "combtomo", version, about = "Self-consistent quantum comb tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; defaults are used for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a ground-truth model and its nominal design to model.json.
    Generate,
    /// Sample outcome statistics from a model into dataset.jsonl.
    Simulate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fit a model to a dataset.
    Reconstruct {
        /// Model file providing the profile, the nominal prior and (for
        /// truth-perturbed starts) the truth.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        /// random | prior | truth-perturbed:<angle>
        #[arg(long, default_value = "prior")]
        init: InitSpec,
    },
    /// Compare a reconstruction against the truth.
    Evaluate {
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        reconstructed: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Full method against the comb-only baseline over a grid of cells.
    Suite,
    /// Time one loss and gradient evaluation per ancilla configuration.
    Benchmark,
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| error::config(format!("--{name} is required")))
}

fn run(cli: Cli) -> Result<()> {
    let (config, config_text) = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            (ConfigDocument::load(path)?, text)
        }
        None => (ConfigDocument::default(), String::new()),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the thread pool")?;
    }
    let out = cli.out.or_else(|| config.paths.out.clone()).unwrap_or_else(|| PathBuf::from("combtomo-out"));
    let paths = config.paths.clone();
    let ctx = Context { seed: cli.seed.unwrap_or(config.seed), config, config_text, out };
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Simulate { model } => commands::simulate(&ctx, &required(model, &paths.model, "model")?),
        Command::Reconstruct { model, data, mode, init } => commands::reconstruct_cmd(
            &ctx,
            &required(model, &paths.model, "model")?,
            &required(data, &paths.dataset, "data")?,
            mode,
            &init,
        ),
        Command::Evaluate { truth, reconstructed, data } => commands::evaluate(
            &ctx,
            &required(truth, &paths.truth, "truth")?,
            &required(reconstructed, &paths.reconstructed, "reconstructed")?,
            data.or(paths.dataset).as_deref(),
        ),
        Command::Suite => commands::suite(&ctx),
        Command::Benchmark => commands::benchmark(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMBTOMO_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error::render(&e));
            ExitCode::from(error::classify(&e).exit_code())
        }
    }
}
