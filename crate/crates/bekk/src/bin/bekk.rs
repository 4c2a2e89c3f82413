//! Batch command-line interface. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 numeric failure.

use bekk::cli::{self, CommonOpts};
use bekk::error::BekkError;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bekk",
    about = "Robust high-dimensional BEKK-ARCH estimation, simulation, and backtesting",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed override for seeded commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Subtract column means from input panels.
    #[arg(long, global = true)]
    center: bool,

    /// Output directory.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a return panel from a generated parameter set.
    Simulate,
    /// Fit the penalized regression at fixed (p, lambda, tau).
    Fit,
    /// Tune, select orders, fit, and recover coefficients.
    Select,
    /// Recover BEKK coefficients from a fitted stack.
    Recover,
    /// Expanding-window minimum-variance portfolio backtest.
    Backtest,
    /// Monte Carlo experiment grid.
    Mc,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match &args.config {
        Some(path) => path.clone(),
        None => {
            eprintln!("error: --config PATH is required");
            return ExitCode::from(2);
        }
    };
    let opts = CommonOpts { seed: args.seed, center: args.center, out: args.out.clone() };

    let run = || match args.command {
        Command::Simulate => cli::cmd_simulate(&config, &opts),
        Command::Fit => cli::cmd_fit(&config, &opts),
        Command::Select => cli::cmd_select(&config, &opts),
        Command::Recover => cli::cmd_recover(&config, &opts),
        Command::Backtest => cli::cmd_backtest(&config, &opts),
        Command::Mc => cli::cmd_mc(&config, &opts),
    };

    let outcome = match args.threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(BekkError::invalid(format!("thread pool: {e}"))),
        },
        Some(_) => Err(BekkError::invalid("--threads must be >= 1")),
        None => run(),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                BekkError::InvalidInput(_) => 2,
                BekkError::Data(_) | BekkError::Io(_) => 3,
                BekkError::Numeric(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
