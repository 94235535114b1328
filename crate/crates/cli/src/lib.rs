//! Command-line harness around `wavelab-core`: JSON configs in, JSON reports
//! and CSV tables out.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Outcome, Status};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "wavelab",
    version,
    about = "Traveling waves of forced mean curvature flow on the torus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip the 1D shooting oracle in `crosscheck`.
    #[arg(long, global = true)]
    pub skip_oracle: bool,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Evaluate the existence and regularity hypotheses on the forcing.
    Check,
    /// Compute the wave speed.
    Speed,
    /// Compute the wave profile, or re-verify a stored one.
    Wave,
    /// Run the shifted flow and record its trace.
    Evolve,
    /// Compare variational, oracle and evolution answers.
    Crosscheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Speed => "speed",
            Command::Wave => "wave",
            Command::Evolve => "evolve",
            Command::Crosscheck => "crosscheck",
        }
    }
}

/// Loads the config, prepares the output directory and runs the command.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.command.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("wavelab-out"));
    std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    let flags = commands::Flags {
        skip_oracle: cli.skip_oracle,
    };
    match cli.command {
        Command::Check => commands::cmd_check(&cfg, &out),
        Command::Speed => commands::cmd_speed(&cfg, &out),
        Command::Wave => commands::cmd_wave(&cfg, &out),
        Command::Evolve => commands::cmd_evolve(&cfg, &out),
        Command::Crosscheck => commands::cmd_crosscheck(&cfg, &out, flags),
    }
}

/// Runs the command and reports on stdout/stderr; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => {
            let code = match outcome.status {
                Status::Pass => EXIT_PASS,
                Status::Inconclusive => EXIT_INCONCLUSIVE,
            };
            if !cli.quiet || code != EXIT_PASS {
                println!("{}: {}", cli.command.name(), outcome.summary);
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
