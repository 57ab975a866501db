//! `tlearn`: data generation, training, gradient checks, denoising,
//! evaluation and noise sweeps.
//!
//! Logs go to stderr (`RUST_LOG` or `-v`); results are written to files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "tlearn", version, about = "Learn sparsifying transforms from clean/noisy signal pairs")]
struct Cli {
    /// JSON file with the subcommand's settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-sample and per-patch work (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a dataset of clean/noisy pairs
    GenData(commands::GenDataArgs),
    /// Learn W by minibatch gradient descent
    Train(commands::TrainArgs),
    /// Compare analytic and finite-difference gradients at W = I
    Gradcheck(commands::GradcheckArgs),
    /// Denoise signals (CSV rows) or an image (PGM) with a transform
    Denoise(commands::DenoiseArgs),
    /// PSNR report for a transform and tuned baselines on a dataset
    Eval(commands::EvalArgs),
    /// Train and evaluate one transform per noise level
    SweepNoise(commands::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::FAILURE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cfg = cli.config.as_deref();
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, cfg),
        Command::Train(a) => commands::train(a, cfg),
        Command::Gradcheck(a) => commands::gradcheck(a, cfg),
        Command::Denoise(a) => commands::denoise(a, cfg),
        Command::Eval(a) => commands::eval(a, cfg),
        Command::SweepNoise(a) => commands::sweep_noise(a, cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
