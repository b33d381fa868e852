//! `sast`: batch simulation, streaming decisions and the oracle threshold.

mod format;
mod gamma;
mod simulate;
mod stream;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit code for configuration and usage errors.
const EXIT_CONFIG: u8 = 2;
/// Exit code for runtime and data errors.
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "sast", version, about = "Structure-adaptive sequential testing with online FDR control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    /// z-scores (standardised by --null-mean/--null-sd)
    Z,
    /// p-values, mapped to z by the randomised inverse transform
    P,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON-configured simulation and write per-checkpoint FDR/MDR as CSV.
    Simulate {
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Significant digits in numeric output.
        #[arg(long, default_value_t = format::DEFAULT_PRECISION)]
        precision: usize,
    },
    /// Read "index,value" lines from stdin and emit one decision per line.
    Stream(stream::StreamArgs),
    /// Monte-Carlo oracle Clfdr threshold of a stationary mixture.
    GammaOr {
        #[arg(long)]
        pi: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            precision,
        } => simulate::run(&config, seed, out.as_deref(), precision),
        Command::Stream(args) => stream::run(&args),
        Command::GammaOr {
            pi,
            mu,
            alpha,
            samples,
            seed,
        } => gamma::run(pi, mu, alpha, samples, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sast: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
