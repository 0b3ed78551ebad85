//! Command-line front end: `rate`, `bounds`, `simulate` and `sweep`.
//!
//! Each command reads an optional JSON config, applies command-line flags on
//! top, and writes a report that echoes the fully resolved config. Exit
//! status is 0 on success, 1 when a computation fails, 2 on invalid input
//! and 3 when an internal cross-check does not hold.

mod commands;
mod config;
mod output;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use config::{
    CachingSpec, ConfigArgs, ExperimentConfig, NamedCaching, NamedPopularity, OutputFormat,
    PopularitySpec,
};
pub use output::Outcome;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CODEDCACHE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "codedcache",
    version,
    about = "Decentralized coded caching with heterogeneous cache allocations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact per-request rate for a fixed demand vector
    Rate(ConfigArgs),
    /// Expected rate with its upper and lower bounds
    Bounds(ConfigArgs),
    /// Bit-level placement and delivery trials
    Simulate(ConfigArgs),
    /// Bound ratio along K = ceil(a N^v) under Zipf popularity
    Sweep(ConfigArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cross-check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse { .. } => 2,
            CliError::Model(e) if e.is_validation() => 2,
            CliError::Model(_) | CliError::Io { .. } => 1,
            CliError::CheckFailed(_) => 3,
        }
    }
}

type Handler = fn(&mut ExperimentConfig) -> Result<Outcome, CliError>;

/// Runs one parsed command, writing its outputs.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (args, command): (&ConfigArgs, Handler) = match &cli.command {
        Command::Rate(a) => (a, commands::rate),
        Command::Bounds(a) => (a, commands::bounds),
        Command::Simulate(a) => (a, commands::simulate),
        Command::Sweep(a) => (a, commands::sweep),
    };
    let mut cfg = args.merged()?;
    let outcome = command(&mut cfg)?;
    outcome.write()?;
    match outcome.failure {
        Some(reason) => Err(CliError::CheckFailed(reason)),
        None => Ok(()),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::config(
            THREADS_ENV,
            format!("expected a positive integer, got {raw:?}"),
        )
    })?;
    // Fails only if a pool already exists, in which case it is kept.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("codedcache: error: {e}");
            e.exit_code()
        }
    }
}
