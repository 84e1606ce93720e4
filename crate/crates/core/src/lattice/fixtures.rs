//! Small hand-built lattices used throughout the tests and docs.
//!
//! Both use the vocabulary `[<bos>, <eos>, a, b, (c)]` with bos = 0, eos = 1.
//! The same lattices ship as JSON under `fixtures/` at the repository root.

use super::{DatLattice, LatticeParts, Vocab};

const NEG_INF: f64 = f64::NEG_INFINITY;

fn ln_row(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .map(|&p| if p == 0.0 { NEG_INF } else { p.ln() })
        .collect()
}

fn vocab(tokens: &[&str]) -> Vocab {
    Vocab::new(tokens.iter().map(|t| t.to_string()).collect(), 0, 1)
        .expect("fixture vocabulary is well-formed")
}

/// Deterministic chain over 4 steps: bos, a, b, eos along links 1→2→3→4.
pub fn l_det() -> DatLattice {
    DatLattice::new(LatticeParts {
        vocab: vocab(&["<bos>", "<eos>", "a", "b"]),
        word_logprobs: vec![
            ln_row(&[1.0, 0.0, 0.0, 0.0]),
            ln_row(&[0.0, 0.0, 1.0, 0.0]),
            ln_row(&[0.0, 0.0, 0.0, 1.0]),
            ln_row(&[0.0, 1.0, 0.0, 0.0]),
        ],
        link_logprobs: vec![
            ln_row(&[1.0, 0.0, 0.0]),
            ln_row(&[1.0, 0.0]),
            ln_row(&[1.0]),
        ],
        source_len: None,
        source_tokens: None,
    })
    .expect("fixture shapes are consistent")
}

/// Five steps with branching links and ambiguous words at steps 2-4.
pub fn l_fork() -> DatLattice {
    DatLattice::new(LatticeParts {
        vocab: vocab(&["<bos>", "<eos>", "a", "b", "c"]),
        word_logprobs: vec![
            ln_row(&[1.0, 0.0, 0.0, 0.0, 0.0]),
            ln_row(&[0.0, 0.0, 0.7, 0.3, 0.0]),
            ln_row(&[0.0, 0.0, 0.1, 0.6, 0.3]),
            ln_row(&[0.0, 0.0, 0.0, 0.5, 0.5]),
            ln_row(&[0.0, 1.0, 0.0, 0.0, 0.0]),
        ],
        link_logprobs: vec![
            ln_row(&[0.6, 0.3, 0.1, 0.0]),
            ln_row(&[0.5, 0.4, 0.1]),
            ln_row(&[0.7, 0.3]),
            ln_row(&[1.0]),
        ],
        source_len: None,
        source_tokens: None,
    })
    .expect("fixture shapes are consistent")
}
