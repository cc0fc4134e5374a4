//! `coopstab` command-line front end.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure
//! (partial outputs are still written and flagged), 1 on I/O errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<coopstab::Error> for CliError {
    fn from(e: coopstab::Error) -> Self {
        use coopstab::Error as E;
        match e {
            E::InvalidInput(_)
            | E::DimensionMismatch { .. }
            | E::NonFinite(_)
            | E::DegenerateLif
            | E::NoHopfPoint { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "coopstab", version, about = "Small-noise experiments for cooperative ODE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Locate and classify equilibria.
    Equilibria,
    /// Euler-Maruyama paths.
    Simulate,
    /// Occupation-measure estimate for one noise level.
    Stationary,
    /// Concentration sweep over decreasing noise levels.
    Sweep,
    /// Minimum-action quasipotential estimate.
    Quasipotential,
    /// Hypothesis checks H1-H3, Lyapunov residual and monotonicity.
    Verify,
    /// Griffith classification table with Monte-Carlo confirmation.
    Table1,
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if matches!(cli.command, Command::Table1) => ExperimentConfig {
            model: None,
            seed: 0,
            output_dir: None,
            equilibria: None,
            simulate: None,
            stationary: None,
            sweep: None,
            quasipotential: None,
            verify: None,
            table1: None,
        },
        None => return Err(CliError::Validation("--config is required for this command".into())),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    match cli.command {
        Command::Equilibria => commands::equilibria(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Stationary => commands::stationary(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Quasipotential => commands::quasipotential(&cfg, &out),
        Command::Verify => commands::verify(&cfg, &out),
        Command::Table1 => commands::table1(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            match outcome.failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
