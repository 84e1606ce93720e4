use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use datlen_core::{
    generate, read_lattice_with, write_lattice, GenSpec, LatticeError, ReadOptions,
    ValidationReport,
};
use serde::Serialize;

use crate::{write_json, CliError, REPORT_VERSION};

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub steps: usize,
    /// Vocabulary size including bos and eos.
    #[arg(long)]
    pub vocab: usize,
    #[arg(long)]
    pub seed: u64,
    /// Dirichlet-style concentration for the sampled rows.
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn gen(args: &GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = GenSpec {
        steps: args.steps,
        vocab_size: args.vocab,
        seed: args.seed,
        concentration: args.concentration,
    };
    let lattice = generate(&spec).map_err(|e| CliError::usage(e.to_string()))?;
    let bytes = write_lattice(&lattice).map_err(|e| CliError::verification(e.to_string()))?;
    match &args.output {
        Some(path) => std::fs::write(path, &bytes)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    /// Rescale rows within tolerance instead of rejecting them.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    version: u32,
    file: String,
    valid: bool,
    steps: usize,
    vocab_size: usize,
    violations: Vec<String>,
    steps_flagged: Vec<usize>,
}

/// Exit 0 for a valid file, 1 for bad distributions, 2 for a malformed one.
/// The report is written whenever the document parses.
pub fn validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = args.file.display().to_string();
    let bytes = std::fs::read(&args.file).map_err(|e| CliError::usage(format!("{file}: {e}")))?;
    let options = ReadOptions {
        renormalize: args.renormalize,
    };
    let (report, steps, vocab_size) = match read_lattice_with(&bytes, options) {
        Ok(lattice) => (
            ValidationReport::default(),
            lattice.steps(),
            lattice.vocab().len(),
        ),
        Err(LatticeError::Invalid(report)) => {
            let doc: serde_json::Value = serde_json::from_slice(&bytes)?;
            let steps = doc["steps"].as_u64().unwrap_or(0) as usize;
            let vocab_size = doc["vocab"].as_array().map_or(0, Vec::len);
            (report, steps, vocab_size)
        }
        Err(e) => return Err(CliError::usage(format!("{file}: {e}"))),
    };
    let valid = report.is_valid();
    write_json(
        out,
        &ValidateReport {
            version: REPORT_VERSION,
            file: file.clone(),
            valid,
            steps,
            vocab_size,
            violations: report.violations.iter().map(ToString::to_string).collect(),
            steps_flagged: report.steps_flagged(),
        },
    )?;
    if valid {
        Ok(())
    } else {
        Err(CliError::verification(format!(
            "{file}: invalid lattice\n{report}"
        )))
    }
}
