//! Command-line front end for `kapitza-core`: parameter scans for every
//! method, finite-time scaling fits and gnuplot script emission.
//!
//! Every scan writes into one output directory:
//! `manifest.json` (configuration, tolerances, seeds, code version), the CSV
//! results, a `README.txt`, gnuplot scripts and `timing.json`. Only
//! `timing.json` differs between two runs of the same manifest.

use std::io;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod config;
pub mod fit;
pub mod output;
pub mod plot;
pub mod scan;

/// `git describe` of the source tree at build time.
pub const VERSION: &str = env!("KAPITZA_GIT_DESCRIBE");

#[derive(Debug, Parser)]
#[command(name = "kapitza", version = VERSION, about = "Stability scans of the driven sine-Gordon model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration of the run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Base seed of the Wigner ensembles; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fixed-point stability of the single driven pendulum.
    Pendulum,
    /// Per-mode Floquet stability of the quadratic chain.
    Quadratic,
    /// Effective couplings and the third-order drive integrals.
    Magnus,
    /// Self-consistent Gaussian dynamics.
    Variational,
    /// Truncated-Wigner ensembles over a line of drive amplitudes.
    Twa,
    /// Fit `g_c(T) = g_c_inf (1 + A/T)` to scans at several run lengths.
    FitScaling,
    /// Regenerate the gnuplot scripts of a finished scan.
    Plot,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pendulum => "pendulum",
            Command::Quadratic => "quadratic",
            Command::Magnus => "magnus",
            Command::Variational => "variational",
            Command::Twa => "twa",
            Command::FitScaling => "fit-scaling",
            Command::Plot => "plot",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("numeric failure in all {0} cells")]
    AllCellsFailed(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] kapitza_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::AllCellsFailed(_) => 4,
            CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Run one subcommand; returns the lines to print on success.
pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be positive".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?
    };
    pool.install(|| match cli.command {
        Command::Plot => plot::emit_for_dir(&cli.out_dir),
        Command::FitScaling => fit::run(config_path(cli)?, &cli.out_dir),
        cmd => {
            let cfg = config::load(config_path(cli)?, cmd)?;
            scan::run(&cfg, &cli.out_dir, cli.seed)
        }
    })
}

fn config_path(cli: &Cli) -> Result<&PathBuf> {
    cli.config
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("`{}` needs --config <file>", cli.command.name())))
}
