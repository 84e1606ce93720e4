//! The `datlen` command line: generate and validate lattices, decode them at
//! a fixed length, score outputs, run the oracle property suite, and time
//! the decoders.
//!
//! Exit codes are 0 on success, 1 when a verification fails, 2 on misuse and
//! 3 when the requested length cannot be produced from the lattice.

mod bench;
mod check;
mod decode;
mod eval;
mod lattice_cmd;

use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use datlen_core::{BosPolicy, Conventions, DatLattice, DecodeError, LatticeError, TerminationMode};

pub use bench::{measure, BenchArgs, ThroughputRow};
pub use check::OracleCheckArgs;
pub use decode::DecodeArgs;
pub use eval::EvalArgs;
pub use lattice_cmd::{GenArgs, ValidateArgs};

/// Version stamped into every JSON report.
pub const REPORT_VERSION: u32 = 1;

pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "datlen",
    version,
    about = "Length-controlled decoding over DAT lattices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random lattice from a seed.
    Gen(GenArgs),
    /// Check a lattice file against the schema and normalization rules.
    Validate(ValidateArgs),
    /// Decode a fixed-length sequence from a lattice.
    Decode(DecodeArgs),
    /// Score hypotheses against references with ROUGE and novelty.
    Eval(EvalArgs),
    /// Cross-check decoders and kernels against brute-force oracles.
    OracleCheck(OracleCheckArgs),
    /// Measure decoding throughput, one lattice at a time.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VERIFICATION,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }

    fn io(what: &Path, err: std::io::Error) -> Self {
        Self::usage(format!("{}: {err}", what.display()))
    }
}

impl From<DecodeError> for CliError {
    fn from(err: DecodeError) -> Self {
        let message = err.to_string();
        match err {
            DecodeError::InfeasibleLength { .. }
            | DecodeError::NoValidPath(_)
            | DecodeError::NoValidSequence(_) => Self::infeasible(message),
            _ => Self::usage(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::usage(format!("write failed: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        Self::usage(format!("could not encode report: {err}"))
    }
}

/// Termination and bos flags shared by every decoding command.
#[derive(Debug, Clone, Copy, Args)]
pub struct ConventionArgs {
    #[arg(long, value_enum, default_value_t = Termination::Eos)]
    pub termination: Termination,
    #[arg(long, value_enum, default_value_t = Bos::Strict)]
    pub bos: Bos,
}

impl ConventionArgs {
    pub fn conventions(&self) -> Conventions {
        let termination = match self.termination {
            Termination::Eos => TerminationMode::Eos,
            Termination::Free => TerminationMode::Free,
        };
        let bos = match self.bos {
            Bos::Strict => BosPolicy::Strict,
            Bos::Verbatim => BosPolicy::Verbatim,
        };
        Conventions::new(termination, bos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Termination {
    Eos,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bos {
    Strict,
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum Objective {
    Pathmap,
    Seqmap,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Pathmap => "pathmap",
            Objective::Seqmap => "seqmap",
        }
    }
}

pub(crate) fn load_lattice(path: &Path, renormalize: bool) -> Result<DatLattice, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    datlen_core::read_lattice_with(&bytes, datlen_core::ReadOptions { renormalize }).map_err(|e| {
        match e {
            LatticeError::Invalid(_) => CliError::verification(format!("{}: {e}", path.display())),
            _ => CliError::usage(format!("{}: {e}", path.display())),
        }
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(
    out: &mut dyn Write,
    value: &T,
) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Runs one parsed command, writing its report to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => lattice_cmd::gen(&args, out),
        Command::Validate(args) => lattice_cmd::validate(&args, out),
        Command::Decode(args) => decode::run(&args, out),
        Command::Eval(args) => eval::run(&args, out),
        Command::OracleCheck(args) => check::run(&args, out),
        Command::Bench(args) => bench::run(&args, out),
    }
}
