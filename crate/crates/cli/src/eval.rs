use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use datlen_core::metrics::{tokenize, word_novelty, RougeScores};
use serde::Serialize;

use crate::{read_text, write_json, CliError, REPORT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalFormat {
    Json,
    Tsv,
}

/// Line-aligned files, one whitespace-tokenized sentence per line.
#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Source sentences, enabling word novelty.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalFormat::Json)]
    pub format: EvalFormat,
}

#[derive(Debug, Serialize)]
struct LineScores {
    line: usize,
    #[serde(flatten)]
    rouge: RougeScores,
    r_sum: f64,
    /// Absent without a source file or for an empty hypothesis.
    #[serde(skip_serializing_if = "Option::is_none")]
    novelty: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Averages {
    rouge1_f1: f64,
    rouge2_f1: f64,
    rouge_l_f1: f64,
    r_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    novelty: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    version: u32,
    lines: usize,
    average: Averages,
    per_line: Vec<LineScores>,
}

fn lines(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    Ok(read_text(path)?.lines().map(tokenize).collect())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn run(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let hyps = lines(&args.hyp)?;
    let refs = lines(&args.reference)?;
    if hyps.len() != refs.len() {
        return Err(CliError::usage(format!(
            "{} hypothesis lines but {} reference lines",
            hyps.len(),
            refs.len()
        )));
    }
    let sources = args.source.as_deref().map(lines).transpose()?;
    if let Some(src) = &sources {
        if src.len() != hyps.len() {
            return Err(CliError::usage(format!(
                "{} hypothesis lines but {} source lines",
                hyps.len(),
                src.len()
            )));
        }
    }
    if hyps.is_empty() {
        return Err(CliError::usage("no lines to evaluate"));
    }

    let per_line: Vec<LineScores> = hyps
        .iter()
        .zip(&refs)
        .enumerate()
        .map(|(i, (h, r))| {
            let rouge = RougeScores::compute(h, r);
            let novelty = sources
                .as_ref()
                .and_then(|src| word_novelty(h, &src[i]).ok());
            LineScores {
                line: i + 1,
                rouge,
                r_sum: rouge.r_sum(),
                novelty,
            }
        })
        .collect();
    let avg = |f: fn(&LineScores) -> f64| mean(per_line.iter().map(f)).unwrap_or(0.0);
    let average = Averages {
        rouge1_f1: avg(|l| l.rouge.rouge1.f1),
        rouge2_f1: avg(|l| l.rouge.rouge2.f1),
        rouge_l_f1: avg(|l| l.rouge.rouge_l.f1),
        r_sum: avg(|l| l.r_sum),
        novelty: sources
            .as_ref()
            .and_then(|_| mean(per_line.iter().filter_map(|l| l.novelty))),
    };
    let report = EvalReport {
        version: REPORT_VERSION,
        lines: per_line.len(),
        average,
        per_line,
    };
    match args.format {
        EvalFormat::Json => write_json(out, &report),
        EvalFormat::Tsv => write_tsv(out, &report),
    }
}

fn write_tsv(out: &mut dyn Write, report: &EvalReport) -> Result<(), CliError> {
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    writeln!(out, "line\trouge1_f1\trouge2_f1\trougeL_f1\tr_sum\tnovelty")?;
    for l in &report.per_line {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
            l.line,
            l.rouge.rouge1.f1,
            l.rouge.rouge2.f1,
            l.rouge.rouge_l.f1,
            l.r_sum,
            cell(l.novelty)
        )?;
    }
    let a = &report.average;
    writeln!(
        out,
        "mean\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
        a.rouge1_f1,
        a.rouge2_f1,
        a.rouge_l_f1,
        a.r_sum,
        cell(a.novelty)
    )?;
    Ok(())
}
