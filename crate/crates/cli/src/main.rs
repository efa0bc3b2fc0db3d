mod config;
mod output;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, Format, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "branched",
    version,
    about = "Branched Hamiltonians: portraits, spectra, deformations"
)]
struct Cli {
    command: Command,
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated output formats
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    /// Flow tolerance (classical) or eigenvalue tolerance (quantum)
    #[arg(long)]
    tol: Option<f64>,
}

const EXIT_COMPUTATION: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            match config::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("invalid config: {e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            }
        }
    };
    if let Some(c) = config.command {
        if c != cli.command {
            eprintln!(
                "invalid config: command: config is for `{c}`, not `{}`",
                cli.command
            );
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let overrides = Overrides {
        out: cli.out,
        formats: cli.format,
        tol: cli.tol,
    };
    let resolved = match config::resolve(cli.command, config, overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match run::run(resolved) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(s) => {
                println!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_COMPUTATION)
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_COMPUTATION)
        }
    }
}
