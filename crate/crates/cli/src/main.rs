//! `plap-lab`: batch runner for the torsion laboratory.
//!
//! ```text
//! plap-lab <solve|verify|sweep|matcheck|radial> --config <path> [--out <dir>] [--seed <u64>]
//! ```
//!
//! Exit codes: 0 all checks pass, 1 an identity check failed, 2 configuration
//! or output error, 3 mesh or solver failure. Failures print a JSON object
//! `{"error": {...}}` on stderr.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{Command, ExperimentConfig};
use crate::run::Failure;

#[derive(Debug, Parser)]
#[command(name = "plap-lab", version, about = "p-Laplacian torsion experiments from a JSON config")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.exit_code())
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(Failure::config(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                cli.command.name()
            )));
        }
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    run::run(cli.command, &cfg)
}
