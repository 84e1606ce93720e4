use std::io::Write;

use clap::Args;
use datlen_core::oracle::OracleLimits;
use datlen_core::seqmap_decode;
use datlen_core::verify::{run_checks, CheckSettings, InstanceCaps};

use crate::{CliError, ConventionArgs};

#[derive(Debug, Clone, Args)]
pub struct OracleCheckArgs {
    /// Number of seeded lattices to check.
    #[arg(long)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 3)]
    pub min_steps: usize,
    #[arg(long, default_value_t = 7)]
    pub max_steps: usize,
    /// Largest vocabulary, bos and eos included.
    #[arg(long, default_value_t = 4)]
    pub max_vocab: usize,
    #[arg(long, default_value_t = 3)]
    pub max_length: usize,
    #[command(flatten)]
    pub conventions: ConventionArgs,
}

/// One `PASS`/`FAIL` line per property, then one line per failing seed.
pub fn run(args: &OracleCheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::usage("--seeds 0 leaves nothing to check"));
    }
    if args.min_steps < 3 || args.min_steps > args.max_steps {
        return Err(CliError::usage(format!(
            "step range {}..={} must start at 3 or more and be non-empty",
            args.min_steps, args.max_steps
        )));
    }
    if args.max_vocab < 3 || args.max_length == 0 {
        return Err(CliError::usage(
            "--max-vocab must be at least 3 and --max-length at least 1",
        ));
    }
    let limits = OracleLimits::default();
    if args.max_steps > limits.max_steps || args.max_length > limits.max_length {
        return Err(CliError::usage(format!(
            "the oracles enumerate at most {} steps and length {}",
            limits.max_steps, limits.max_length
        )));
    }
    let sequences = (args.max_vocab - 2).checked_pow(args.max_length as u32);
    if sequences.is_none_or(|n| n > limits.max_sequences) {
        return Err(CliError::usage(format!(
            "{} content tokens at length {} exceeds the oracle's {} sequences",
            args.max_vocab - 2,
            args.max_length,
            limits.max_sequences
        )));
    }
    let mut settings = CheckSettings::new(args.seeds);
    settings.base_seed = args.base_seed;
    settings.caps = InstanceCaps {
        min_steps: args.min_steps,
        max_steps: args.max_steps,
        max_vocab: args.max_vocab,
        max_length: args.max_length,
    };
    settings.conventions = args.conventions.conventions();
    let outcomes = run_checks(&settings, seqmap_decode);

    let mut failed = Vec::new();
    for o in &outcomes {
        let passed = o.checked - o.failures.len();
        let status = if o.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {} {passed}/{}", o.property, o.checked)?;
        failed.extend(o.failures.iter().map(|f| (o.property, f)));
    }
    for (property, f) in &failed {
        writeln!(out, "  seed {} {property}: {}", f.seed, f.detail)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::verification(format!(
            "{} property violation(s)",
            failed.len()
        )))
    }
}
