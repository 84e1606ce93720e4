use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgGroup, Args};
use datlen_core::lattice::serde_logprob;
use datlen_core::metrics::tokenize;
use datlen_core::rerank::{IdentityReranker, MarginalReranker, OverlapReranker};
use datlen_core::seqmap::{DEFAULT_BEAM, DEFAULT_EXPAND};
use datlen_core::{
    pathmap_decode, seqmap_decode, CandidateList, DatLattice, DecodeConfig, LengthSpec, Reranker,
    ScoredSequence,
};
use serde::Serialize;

use crate::{
    load_lattice, read_text, write_json, CliError, ConventionArgs, Objective, REPORT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RerankChoice {
    None,
    Marginal,
    Overlap(PathBuf),
}

impl RerankChoice {
    fn name(&self) -> &'static str {
        match self {
            RerankChoice::None => "none",
            RerankChoice::Marginal => "marginal",
            RerankChoice::Overlap(_) => "overlap",
        }
    }
}

fn parse_rerank(value: &str) -> Result<RerankChoice, String> {
    match value {
        "none" => Ok(RerankChoice::None),
        "marginal" => Ok(RerankChoice::Marginal),
        _ => match value.strip_prefix("overlap:") {
            Some(path) if !path.is_empty() => Ok(RerankChoice::Overlap(PathBuf::from(path))),
            _ => Err("expected none, marginal or overlap:<reference-file>".into()),
        },
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["length", "ratio"])))]
pub struct DecodeArgs {
    #[arg(long)]
    pub lattice: PathBuf,
    /// Exact number of content tokens to produce.
    #[arg(long)]
    pub length: Option<usize>,
    /// Length as a fraction of the lattice's source_len, floored, at least 1.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, value_enum)]
    pub objective: Objective,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    pub beam: usize,
    #[arg(long, default_value_t = DEFAULT_EXPAND)]
    pub expand: usize,
    #[command(flatten)]
    pub conventions: ConventionArgs,
    /// none, marginal, or overlap:<file> with a whitespace-tokenized reference.
    #[arg(long, value_parser = parse_rerank, default_value = "marginal")]
    pub rerank: RerankChoice,
    /// Number of candidates to list in the report; all when omitted.
    #[arg(long)]
    pub top_k_out: Option<usize>,
    /// Print a human-readable table instead of JSON.
    #[arg(long)]
    pub pretty: bool,
    /// Include wall-clock decode time (makes the report non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Serialize)]
struct CandidateReport {
    rank: usize,
    tokens: Vec<String>,
    #[serde(with = "serde_logprob")]
    log_marginal: f64,
    #[serde(
        serialize_with = "serde_logprob::option::serialize",
        skip_serializing_if = "Option::is_none"
    )]
    beam_total: Option<f64>,
    #[serde(
        serialize_with = "serde_logprob::option::serialize",
        skip_serializing_if = "Option::is_none"
    )]
    log_best_path: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DecodeReport {
    version: u32,
    objective: &'static str,
    length: usize,
    termination: String,
    bos: String,
    beam: Option<usize>,
    expand: Option<usize>,
    rerank: &'static str,
    chosen: CandidateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    linked_steps: Option<Vec<usize>>,
    candidates: Vec<CandidateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decode_seconds: Option<f64>,
}

fn candidate(lattice: &DatLattice, rank: usize, seq: &ScoredSequence) -> CandidateReport {
    CandidateReport {
        rank,
        tokens: lattice.vocab().render(&seq.tokens),
        log_marginal: seq.log_marginal,
        beam_total: seq.beam_total,
        log_best_path: seq.log_best_path,
    }
}

fn reranker(choice: &RerankChoice) -> Result<Box<dyn Reranker>, CliError> {
    Ok(match choice {
        RerankChoice::None => Box::new(IdentityReranker),
        RerankChoice::Marginal => Box::new(MarginalReranker),
        RerankChoice::Overlap(path) => Box::new(OverlapReranker {
            reference: Some(tokenize(&read_text(path)?)),
        }),
    })
}

pub fn run(args: &DecodeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let lattice = load_lattice(&args.lattice, false)?;
    let conventions = args.conventions.conventions();
    let length_spec = match (args.length, args.ratio) {
        (Some(t), None) => LengthSpec::Tokens(t),
        (None, Some(r)) => LengthSpec::Ratio(r),
        _ => return Err(CliError::usage("give exactly one of --length and --ratio")),
    };
    let mut config = DecodeConfig::new(0)
        .with_beam(args.beam, args.expand)
        .with_conventions(conventions);
    config.length = length_spec;
    let length = config.resolve_length(&lattice)?;
    let reranker = reranker(&args.rerank)?;

    let started = Instant::now();
    let (sequences, linked_steps) = match args.objective {
        Objective::Pathmap => {
            let (path, seq) = pathmap_decode(&lattice, length, conventions)?;
            (vec![seq], Some(path.linked_steps().to_vec()))
        }
        Objective::Seqmap => (seqmap_decode(&lattice, &config)?, None),
    };
    let elapsed = started.elapsed().as_secs_f64();

    let list = CandidateList::from_decoded(&sequences, lattice.vocab()).map_err(|e| {
        CliError::verification(format!("decoder returned a bad candidate list: {e}"))
    })?;
    let list = match lattice.source_tokens() {
        Some(src) => list.with_context(src.to_vec()),
        None => list,
    };
    let pick = reranker.select(&list);
    let shown = args
        .top_k_out
        .unwrap_or(sequences.len())
        .min(sequences.len());
    let seqmap = args.objective == Objective::Seqmap;
    let report = DecodeReport {
        version: REPORT_VERSION,
        objective: args.objective.name(),
        length,
        termination: conventions.termination.to_string(),
        bos: conventions.bos.to_string(),
        beam: seqmap.then_some(args.beam),
        expand: seqmap.then_some(args.expand),
        rerank: args.rerank.name(),
        chosen: candidate(&lattice, pick + 1, &sequences[pick]),
        linked_steps,
        candidates: sequences[..shown]
            .iter()
            .enumerate()
            .map(|(i, s)| candidate(&lattice, i + 1, s))
            .collect(),
        decode_seconds: args.timing.then_some(elapsed),
    };
    if args.pretty {
        print_table(out, &report)
    } else {
        write_json(out, &report)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn print_table(out: &mut dyn Write, report: &DecodeReport) -> Result<(), CliError> {
    writeln!(
        out,
        "{} T={} ({}, {} bos, rerank {})",
        report.objective, report.length, report.termination, report.bos, report.rerank
    )?;
    writeln!(
        out,
        "chosen: #{} {}",
        report.chosen.rank,
        report.chosen.tokens.join(" ")
    )?;
    if let Some(steps) = &report.linked_steps {
        writeln!(out, "linked steps: {steps:?}")?;
    }
    writeln!(
        out,
        "{:>4}  {:>12}  {:>12}  {:>12}  tokens",
        "rank", "marginal", "beam", "best-path"
    )?;
    for c in &report.candidates {
        writeln!(
            out,
            "{:>4}  {:>12.6}  {:>12}  {:>12}  {}",
            c.rank,
            c.log_marginal,
            fmt_opt(c.beam_total),
            fmt_opt(c.log_best_path),
            c.tokens.join(" ")
        )?;
    }
    if let Some(secs) = report.decode_seconds {
        writeln!(out, "decode time: {:.3} ms", secs * 1e3)?;
    }
    Ok(())
}
