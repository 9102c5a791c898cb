//! `thw`: solve, analyze, verify, evolve and sweep standing waves.
//!
//! Exit codes: 0 success (stable or marginal verdicts), 1 usage or parameter
//! guard, 2 convergence or verification failure, 3 unstable verdict.

mod commands;
mod config;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigFile;

/// A failure that ends the command with exit code 1 or 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Convergence(String),
}

impl From<thw::Error> for Failure {
    fn from(e: thw::Error) -> Self {
        use thw::Error::*;
        match e {
            Convergence { .. } | Degenerate(_) | SpectralAssumption(_) | Eigensolver(_) => {
                Failure::Convergence(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CONVERGENCE: u8 = 2;
pub const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "thw", version, about = "Standing waves of a cubic two-wave Schrodinger system with third-harmonic coupling")]
struct Cli {
    /// key = value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute a standing wave and write the profile with its Pohozaev report.
    Solve(commands::SolveArgs),
    /// Spectral analysis of a saved profile.
    Analyze(commands::AnalyzeArgs),
    /// Run the invariant battery on a saved profile.
    Verify(commands::VerifyArgs),
    /// Evolve initial data built from a saved profile.
    Evolve(commands::EvolveArgs),
    /// Blow-up experiment near a saved profile.
    Blowup(commands::BlowupArgs),
    /// Solve and analyze over a parameter grid.
    Sweep(sweep::SweepArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Space dimension (1, 2 or 3).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    /// periodic, radial-spectral or radial-graded.
    #[arg(long)]
    pub grid: Option<String>,
    /// Points per axis (periodic) or radial nodes (spectral).
    #[arg(long)]
    pub points: Option<usize>,
    /// Box half-width or outer radius.
    #[arg(long)]
    pub extent: Option<f64>,
    /// Smallest cell of a graded grid.
    #[arg(long)]
    pub h_min: Option<f64>,
    /// Relative cell growth of a graded grid.
    #[arg(long)]
    pub growth: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutArgs {
    /// Output directory; defaults to $THW_OUTPUT_DIR or the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stem of the output files.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Solve(a) => commands::solve(a, &cfg),
        Command::Analyze(a) => commands::analyze(a, &cfg),
        Command::Verify(a) => commands::verify(a, &cfg),
        Command::Evolve(a) => commands::evolve(a, &cfg),
        Command::Blowup(a) => commands::blowup(a, &cfg),
        Command::Sweep(a) => sweep::sweep(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Convergence(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONVERGENCE)
        }
    }
}
