//! `gigsim` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when a command fails.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gigsim", version, about = "Gig-delivery platform simulator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layer {
    Observe,
    Intervene,
    Mechanism,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the factorial design from the config's `experiment` section.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Concurrent runs; defaults to the available cores.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Run one analysis layer over a simulate or experiment output directory.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        layer: Layer,
        #[arg(long)]
        out: PathBuf,
        /// Window length in steps (heatmaps: one day; mechanism: a tenth of the horizon).
        #[arg(long)]
        window: Option<u32>,
    },
    /// Combine the artifacts in a directory into report.md and report.json.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV with a `real` column of observed day-end values to compare against.
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIM_LOG_LEVEL", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate { config, seed, out } => commands::simulate(&config, seed, &out),
        Command::Experiment { config, out, parallel } => commands::experiment(&config, &out, parallel),
        Command::Analyze { input, layer, out, window } => commands::analyze(&input, layer, &out, window),
        Command::Report { input, out, benchmark } => report::report(&input, &out, benchmark.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
