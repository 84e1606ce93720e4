use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use datlen_core::seqmap::{DEFAULT_BEAM, DEFAULT_EXPAND};
use datlen_core::{generate, pathmap_decode, seqmap_decode, DatLattice, DecodeConfig, GenSpec};
use serde::Serialize;

use crate::{load_lattice, write_json, CliError, ConventionArgs, Objective, REPORT_VERSION};

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Lattice files to decode; overrides the generator flags.
    #[arg(long, num_args = 1..)]
    pub lattice_set: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub vocab: usize,
    /// Seed of the first generated lattice; the rest follow consecutively.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub length: usize,
    /// Comma-separated objectives, timed in the order given.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "pathmap,seqmap"
    )]
    pub objectives: Vec<Objective>,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    pub beam: usize,
    #[arg(long, default_value_t = DEFAULT_EXPAND)]
    pub expand: usize,
    #[command(flatten)]
    pub conventions: ConventionArgs,
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Serialize)]
pub struct ThroughputRow {
    pub objective: &'static str,
    pub sentences: usize,
    pub words: usize,
    pub seconds: f64,
    pub sentences_per_second: f64,
    pub words_per_second: f64,
    /// Mean exact log-marginal of the outputs; deterministic for fixed inputs.
    pub mean_log_marginal: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    version: u32,
    lattices: usize,
    length: usize,
    rows: Vec<ThroughputRow>,
}

/// Decodes every lattice one at a time and reports throughput.
pub fn measure(
    lattices: &[DatLattice],
    objective: Objective,
    config: &DecodeConfig,
    length: usize,
) -> Result<ThroughputRow, CliError> {
    let mut words = 0;
    let mut marginal_sum = 0.0;
    let started = Instant::now();
    for lattice in lattices {
        let seq = match objective {
            Objective::Pathmap => pathmap_decode(lattice, length, config.conventions)?.1,
            Objective::Seqmap => seqmap_decode(lattice, config)?.swap_remove(0),
        };
        words += seq.tokens.len();
        marginal_sum += seq.log_marginal;
    }
    let seconds = started.elapsed().as_secs_f64();
    let per_second = |n: usize| {
        if seconds > 0.0 {
            n as f64 / seconds
        } else {
            f64::INFINITY
        }
    };
    Ok(ThroughputRow {
        objective: objective.name(),
        sentences: lattices.len(),
        words,
        seconds,
        sentences_per_second: per_second(lattices.len()),
        words_per_second: per_second(words),
        mean_log_marginal: marginal_sum / lattices.len() as f64,
    })
}

pub fn run(args: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let lattices = if args.lattice_set.is_empty() {
        if args.count == 0 {
            return Err(CliError::usage("--count must be at least 1"));
        }
        (0..args.count as u64)
            .map(|i| {
                generate(&GenSpec::new(
                    args.steps,
                    args.vocab,
                    args.seed.wrapping_add(i),
                ))
                .map_err(|e| CliError::usage(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        args.lattice_set
            .iter()
            .map(|p| load_lattice(p, false))
            .collect::<Result<Vec<_>, _>>()?
    };
    let config = DecodeConfig::new(args.length)
        .with_beam(args.beam, args.expand)
        .with_conventions(args.conventions.conventions());
    let rows = args
        .objectives
        .iter()
        .map(|&objective| measure(&lattices, objective, &config, args.length))
        .collect::<Result<Vec<_>, _>>()?;
    let report = BenchReport {
        version: REPORT_VERSION,
        lattices: lattices.len(),
        length: args.length,
        rows,
    };
    if !args.pretty {
        return write_json(out, &report);
    }
    writeln!(
        out,
        "{} lattices, T={}, batch size 1",
        report.lattices, report.length
    )?;
    writeln!(
        out,
        "{:<9} {:>12} {:>12} {:>14}",
        "objective", "sent/s", "words/s", "mean marginal"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{:<9} {:>12.1} {:>12.1} {:>14.4}",
            r.objective, r.sentences_per_second, r.words_per_second, r.mean_log_marginal
        )?;
    }
    Ok(())
}
