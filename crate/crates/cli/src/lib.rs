//! Command-line experiments for the `divkde` estimators: `estimate`,
//! `sweep`, `ci` and `validate-kernel`.
//!
//! Every command is a pure function of the config text and the seed; the
//! thread count only changes how fast it runs.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
        }
    }
}

impl From<divkde::Error> for CliError {
    fn from(e: divkde::Error) -> Self {
        match e {
            divkde::Error::Config(_) | divkde::Error::Parameter(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "divkde", version, about = "Kernel plug-in divergence experiments")]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// All six divergences by quadrature and Monte Carlo.
    Estimate(RunArgs),
    /// Bandwidth sweep with error decomposition and rate fit.
    Sweep(RunArgs),
    /// Certainty intervals and coverage.
    Ci(RunArgs),
    /// Numerical check of the kernel conditions.
    ValidateKernel(KernelArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long, default_value_t = 2)]
    pub order: u32,
    #[arg(long, default_value_t = 1)]
    pub dimension: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

/// Runs a parsed command, inside a dedicated pool when `threads` is set.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Estimate(a) => commands::cmd_estimate(&config::load(&a.config, a.seed, a.out.as_deref())?),
        Command::Sweep(a) => commands::cmd_sweep(&config::load(&a.config, a.seed, a.out.as_deref())?),
        Command::Ci(a) => commands::cmd_ci(&config::load(&a.config, a.seed, a.out.as_deref())?),
        Command::ValidateKernel(k) => commands::cmd_validate_kernel(&k.family, k.order, k.dimension, k.tolerance),
    }
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("divkde: {e}");
            e.exit_code()
        }
    }
}
