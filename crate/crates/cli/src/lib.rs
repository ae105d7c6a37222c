//! Command-line driver: config resolution, experiment orchestration and artifact output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "pqc", version = pqc_core::VERSION, about = "Parameterized quantum circuit toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by the training subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Shots per distribution estimate, or `inf` for exact probabilities.
    #[arg(long)]
    pub shots: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IoArgs {
    /// Output directory (default: $PQC_OUT_DIR, then ./pqc-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a circuit and sample or list its outcome distribution.
    Simulate {
        /// Circuit JSON.
        #[arg(long)]
        circuit: PathBuf,
        /// JSON array of slot values.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        shots: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Compile an IQP circuit into fan-out MPQC blocks.
    CompileIqp {
        /// IQP circuit JSON.
        #[arg(long = "in")]
        input: PathBuf,
        /// Check the schedule against the IQP state.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Run a circuit as an MPS and trace bond dimensions and entropies.
    EntropyAnalyze {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Truncate bonds above this dimension.
        #[arg(long)]
        max_bond: Option<usize>,
        /// Fail once any bond exceeds this dimension.
        #[arg(long)]
        hard_cap: Option<usize>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Train a BQC on bars and stripes.
    TrainBas {
        /// Grid size, e.g. 2x2 or 3x3.
        #[arg(long)]
        size: Option<String>,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Learn a two-class prior through one ancilla rotation.
    TrainPrior {
        /// Target p(λ₁).
        #[arg(long)]
        target: Option<f64>,
        /// amplitude-encode or fitted-blocks.
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Two-gate circuit for the 1 0…0 1 distribution, plus a chain-circuit fit.
    ToyThm3 {
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Verify gate identities, decompositions and compiler invariants.
    Selftest,
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
                _ => {
                    let err = CliError::validation(e.to_string().trim().to_string());
                    let _ = writeln!(stderr, "{}", err.to_json());
                    err.exit_code()
                }
            };
        }
    };
    match commands::dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "{}", err.to_json());
            err.exit_code()
        }
    }
}
