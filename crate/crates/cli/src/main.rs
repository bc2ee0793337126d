use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levygame_cli::{run_fit, run_selfcheck, run_simulate, run_solve, RunConfig, Status};

#[derive(Parser)]
#[command(name = "levygame", version, about = "Perpetual convertible bond game under a spectrally positive Lévy model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the value grid as CSV to this file (solve only).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Suppress the report on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the regime and evaluate the value function on the grid.
    Solve { config: PathBuf },
    /// Compare the value function and saddle inequalities with Monte Carlo.
    Simulate { config: PathBuf },
    /// Report the fit at the free boundary.
    Fit { config: PathBuf },
    /// Run the scale-function and Wiener-Hopf self checks.
    Selfcheck { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (path, run): (_, fn(&RunConfig) -> levygame_cli::Outcome) = match &cli.command {
        Command::Solve { config } => (config, run_solve),
        Command::Simulate { config } => (config, run_simulate),
        Command::Fit { config } => (config, run_fit),
        Command::Selfcheck { config } => (config, run_selfcheck),
    };
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(Status::Config as u8);
        }
    };
    let outcome = run(&cfg);
    if !cli.quiet {
        print!("{}", outcome.report);
    }
    if let Some(path) = &cli.csv {
        match &outcome.csv {
            Some(text) => {
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return ExitCode::from(Status::Config as u8);
                }
            }
            None if outcome.status == Status::Ok => log::warn!("this command produces no CSV"),
            None => {}
        }
    }
    if outcome.status != Status::Ok && cli.quiet {
        eprint!("{}", outcome.report);
    }
    ExitCode::from(outcome.status as u8)
}
