//! Reproducible synthetic lattices.
//!
//! Procedure, for `GenSpec { steps: S, vocab_size: n, seed, concentration: c }`:
//!
//! 1. Vocabulary `["<bos>", "<eos>", "tok1", ..., "tok{n-2}"]`, bos = 0, eos = 1.
//! 2. Step 1 puts all word mass on bos, step `S` all word mass on eos.
//! 3. One SplitMix64 stream seeded with `seed` draws, in order: the word rows
//!    of steps `2..S-1` (content tokens only, in id order; bos and eos get zero
//!    mass), then the link rows of steps `1..S-1` (targets in increasing order).
//! 4. Each row is a point on the simplex: per coordinate `u = (x >> 11) * 2^-53`,
//!    `e = -ln(1 - u)`, weight `e^(1/c)`, then divide by the row sum and take `ln`.

use super::{DatLattice, LatticeParts, Vocab};
use crate::error::LatticeError;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub steps: usize,
    pub vocab_size: usize,
    pub seed: u64,
    /// Larger values give flatter rows, smaller values peakier ones.
    pub concentration: f64,
}

impl GenSpec {
    pub fn new(steps: usize, vocab_size: usize, seed: u64) -> Self {
        Self {
            steps,
            vocab_size,
            seed,
            concentration: 1.0,
        }
    }

    pub fn check(&self) -> Result<(), LatticeError> {
        if self.steps < 3 {
            return Err(LatticeError::GenSpec(format!(
                "steps must be at least 3, got {}",
                self.steps
            )));
        }
        if self.vocab_size < 3 {
            return Err(LatticeError::GenSpec(format!(
                "vocab_size must be at least 3, got {}",
                self.vocab_size
            )));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(LatticeError::GenSpec(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        Ok(())
    }
}

fn simplex_row(rng: &mut SplitMix64, len: usize, exponent: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..len).map(|_| rng.next_exp().powf(exponent)).collect();
    let total: f64 = weights.iter().sum();
    weights
        .into_iter()
        .map(|w| {
            if w == 0.0 {
                f64::NEG_INFINITY
            } else {
                (w / total).ln()
            }
        })
        .collect()
}

fn point_mass(len: usize, at: usize) -> Vec<f64> {
    let mut row = vec![f64::NEG_INFINITY; len];
    row[at] = 0.0;
    row
}

pub fn generate(spec: &GenSpec) -> Result<DatLattice, LatticeError> {
    spec.check()?;
    let steps = spec.steps;
    let width = spec.vocab_size;
    let mut tokens = vec!["<bos>".to_string(), "<eos>".to_string()];
    tokens.extend((1..=width - 2).map(|i| format!("tok{i}")));
    let vocab = Vocab::new(tokens, 0, 1)?;

    let exponent = 1.0 / spec.concentration;
    let mut rng = SplitMix64::new(spec.seed);

    let mut word_logprobs = Vec::with_capacity(steps);
    word_logprobs.push(point_mass(width, 0));
    for _ in 2..steps {
        let mut row = vec![f64::NEG_INFINITY, f64::NEG_INFINITY];
        row.extend(simplex_row(&mut rng, width - 2, exponent));
        word_logprobs.push(row);
    }
    word_logprobs.push(point_mass(width, 1));

    let link_logprobs = (1..steps)
        .map(|s| simplex_row(&mut rng, steps - s, exponent))
        .collect();

    DatLattice::new(LatticeParts {
        vocab,
        word_logprobs,
        link_logprobs,
        source_len: None,
        source_tokens: None,
    })
}
