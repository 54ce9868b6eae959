use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wz_lab::{run, ExperimentConfig, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "wzlab", version, about = "Wong-Zakai approximation rate studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noise approximation errors and their rates.
    Noise(Args),
    /// Approximating and limit trajectories.
    Solve(Args),
    /// Coupled solution errors and their rates.
    Rates(Args),
    /// The invariant suite.
    Check(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Noise(a) => (Mode::Noise, a),
        Command::Solve(a) => (Mode::Solve, a),
        Command::Rates(a) => (Mode::Rates, a),
        Command::Check(a) => (Mode::Check, a),
    };
    let opts = RunOptions { out: args.out, replicas: args.replicas, threads: args.threads };
    let result = ExperimentConfig::load(&args.config).and_then(|cfg| run(mode, cfg, &opts));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            println!("wrote {}", outcome.output.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
