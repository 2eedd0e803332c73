use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dawc::harness::{execute, Invocation};

/// Doppler-assisted interference mitigation experiments.
#[derive(Debug, Parser)]
#[command(name = "dawc", version)]
struct Cli {
    /// One of: ber, sir-theta, sir-omega, sir-speed, psd, ma-sir, rpm, energy
    experiment: String,
    /// INI configuration file
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// `key=value` or `section.key=value` overrides
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let inv = Invocation {
        experiment: cli.experiment,
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        workers: cli.workers,
        overrides: cli.overrides,
    };
    match execute(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dawc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
