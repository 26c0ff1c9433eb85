//! `dwlab`: command-line driver for the damped wave laboratory.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 a checked result
//! disagrees with its reference, 3 inconclusive classification.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dwlab_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(_) | CliError::Io(_) => 1,
            CliError::Mismatch(_) => 2,
            CliError::Inconclusive(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dwlab", version, about = "Damped wave laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration (a manifest from an earlier run also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true, env = "DWLAB_OUT", default_value = "dwlab-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores. One worker gives
    /// bitwise reproducible output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural checks of a modulus: slow variation, Dini integral, convexity.
    Classify {
        /// e.g. `invlog:p=1`, `iterlog:p=1,depth=2`, `custom:table.txt`
        spec: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Linear evolution and decay-rate fits.
    Linear,
    /// One semilinear run.
    Run,
    /// Lifespan sweep over forcings and amplitudes.
    Sweep,
    /// Test-function functionals and the blow-up certificate.
    Certificate,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dwlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let ctx = commands::Context::new(cli, pool.current_num_threads())?;
    pool.install(|| match &cli.command {
        Command::Classify { spec, dim } => commands::classify(&ctx, spec, *dim),
        Command::Linear => commands::linear(&ctx),
        Command::Run => commands::run(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Certificate => commands::certificate(&ctx),
    })
}
