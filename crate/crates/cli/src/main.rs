//! `phcoh`: sweeps, gate studies, time-tag generation and analysis.
//!
//! Every subcommand takes `--config <json>`; flags override the file, and the file
//! overrides built-in defaults. Exit codes: 0 success, 2 bad config or input, 3 a
//! numerical contract failed.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{cnot, concurrence, hom, timetag};

#[derive(Debug, Parser)]
#[command(name = "phcoh", version, about = "Photon-number coherence in linear-optical experiments")]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "PHCOH_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correlation peaks over pulse area, phase and overlap.
    HomSweep(hom::HomSweepArgs),
    /// Heralding probability and Bell-state fidelity of the heralded CNOT.
    Cnot(cnot::CnotArgs),
    /// Generate a synthetic time-tag stream.
    TimetagGen(timetag::TimetagGenArgs),
    /// Estimate source parameters from time-tag streams.
    TimetagAnalyze(timetag::TimetagAnalyzeArgs),
    /// Concurrence of the post-selected time-bin state.
    Concurrence(concurrence::ConcurrenceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("config error: workers must be positive");
            return ExitCode::from(2);
        }
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::HomSweep(a) => hom::run(a),
        Command::Cnot(a) => cnot::run(a),
        Command::TimetagGen(a) => timetag::run_gen(a),
        Command::TimetagAnalyze(a) => timetag::run_analyze(a),
        Command::Concurrence(a) => concurrence::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phcoh: {e}");
            e.exit_code()
        }
    }
}
