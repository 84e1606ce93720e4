//! Log-space probability kernels shared by the decoders.
//!
//! A *path* visits strictly increasing steps and emits one word per visited
//! step. Its probability is the product of the first word factor and, for
//! every later visit, the link factor into that step times its word factor.
//! The *sequence marginal* of a content token sequence sums that product over
//! every placement of the tokens onto steps, under a pair of [`Conventions`]:
//! how the sequence starts ([`BosPolicy`]) and how it ends
//! ([`TerminationMode`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::DecodeError;
use crate::lattice::{DatLattice, TokenId};

/// `ln Σ exp(v)`. Exactly `-inf` for empty or all-`-inf` input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))` with `-inf` absorbing.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationMode {
    /// The last content token links into step `S`, which emits eos.
    #[default]
    Eos,
    /// The last content token may sit at any step; no final link or eos factor.
    Free,
}

impl fmt::Display for TerminationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationMode::Eos => "eos",
            TerminationMode::Free => "free",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BosPolicy {
    /// bos sits at step 1 and contributes `w(1, bos)`.
    #[default]
    Strict,
    /// bos has score 1 at every step, so the first content token may link
    /// from any earlier step and no bos word factor is applied.
    Verbatim,
}

impl fmt::Display for BosPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BosPolicy::Strict => "strict",
            BosPolicy::Verbatim => "verbatim",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conventions {
    pub termination: TerminationMode,
    pub bos: BosPolicy,
}

impl Conventions {
    pub fn new(termination: TerminationMode, bos: BosPolicy) -> Self {
        Self { termination, bos }
    }

    /// Last step a content token may occupy. Content always starts at step 2.
    pub fn last_content_step(&self, steps: usize) -> usize {
        match self.termination {
            TerminationMode::Eos => steps.saturating_sub(1),
            TerminationMode::Free => steps,
        }
    }

    pub fn max_length(&self, steps: usize) -> usize {
        self.last_content_step(steps).saturating_sub(1)
    }

    pub fn check_length(&self, steps: usize, length: usize) -> Result<(), DecodeError> {
        if length == 0 {
            return Err(DecodeError::EmptySequence);
        }
        let max = self.max_length(steps);
        if length > max {
            return Err(DecodeError::InfeasibleLength {
                length,
                steps,
                max,
                termination: self.termination,
            });
        }
        Ok(())
    }

    /// Log score of the empty prefix ending at each step, indexed `0..=S`
    /// (index 0 unused). Strict: only step 1, carrying `w(1, bos)`.
    /// Verbatim: every step, score 0.
    pub fn start_scores(&self, lattice: &DatLattice) -> Vec<f64> {
        let steps = lattice.steps();
        let mut scores = vec![f64::NEG_INFINITY; steps + 1];
        match self.bos {
            BosPolicy::Strict => scores[1] = lattice.word_logprob(1, lattice.vocab().bos_id()),
            BosPolicy::Verbatim => scores[1..].iter_mut().for_each(|v| *v = 0.0),
        }
        scores
    }

    /// Log factor closing a sequence whose last content token sits at `step`.
    pub fn closing_logprob(&self, lattice: &DatLattice, step: usize) -> f64 {
        match self.termination {
            TerminationMode::Eos => {
                let s = lattice.steps();
                lattice.link_logprob(step, s) + lattice.word_logprob(s, lattice.vocab().eos_id())
            }
            TerminationMode::Free => 0.0,
        }
    }
}

/// Linked steps plus the word emitted at each.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    linked_steps: Vec<usize>,
    words: Vec<TokenId>,
}

impl Path {
    pub fn new(linked_steps: Vec<usize>, words: Vec<TokenId>) -> Result<Self, DecodeError> {
        if linked_steps.is_empty() {
            return Err(DecodeError::InvalidPath(
                "a path visits at least one step".into(),
            ));
        }
        if linked_steps.len() != words.len() {
            return Err(DecodeError::InvalidPath(format!(
                "{} steps but {} words",
                linked_steps.len(),
                words.len()
            )));
        }
        if linked_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DecodeError::InvalidPath(format!(
                "linked steps {linked_steps:?} are not strictly increasing"
            )));
        }
        Ok(Self {
            linked_steps,
            words,
        })
    }

    pub fn linked_steps(&self) -> &[usize] {
        &self.linked_steps
    }

    pub fn words(&self) -> &[TokenId] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.linked_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linked_steps.is_empty()
    }
}

/// A decoded token sequence and its scores (natural logs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub tokens: Vec<TokenId>,
    /// Exact marginal over every placement of `tokens`.
    pub log_marginal: f64,
    /// Score of the single best path, when the decoder tracks one.
    pub log_best_path: Option<f64>,
    /// Score accumulated inside the beam; a lower bound on `log_marginal`.
    pub beam_total: Option<f64>,
}

impl ScoredSequence {
    /// Score used for beam order: the beam total when present, otherwise the
    /// exact marginal.
    pub fn ranking_score(&self) -> f64 {
        self.beam_total.unwrap_or(self.log_marginal)
    }
}

fn check_token(lattice: &DatLattice, token: TokenId) -> Result<(), DecodeError> {
    let vocab_size = lattice.vocab().len();
    if token >= vocab_size {
        Err(DecodeError::TokenOutOfRange { token, vocab_size })
    } else {
        Ok(())
    }
}

/// `ln w(a1, v1) + Σ_t [ln l(a_{t-1}, a_t) + ln w(a_t, v_t)]`.
pub fn path_logprob(lattice: &DatLattice, path: &Path) -> Result<f64, DecodeError> {
    let steps = lattice.steps();
    for (&step, &word) in path.linked_steps.iter().zip(&path.words) {
        if step == 0 || step > steps {
            return Err(DecodeError::StepOutOfRange { step, steps });
        }
        check_token(lattice, word)?;
    }
    let mut score = lattice.word_logprob(path.linked_steps[0], path.words[0]);
    for t in 1..path.len() {
        let (prev, cur) = (path.linked_steps[t - 1], path.linked_steps[t]);
        score += lattice.link_logprob(prev, cur) + lattice.word_logprob(cur, path.words[t]);
    }
    Ok(score)
}

/// Exact log marginal of a content sequence by forward recursion,
/// `O(T·S²)`.
// DP tables are indexed by step on purpose.
#[allow(clippy::needless_range_loop)]
pub fn sequence_log_marginal(
    lattice: &DatLattice,
    tokens: &[TokenId],
    conventions: Conventions,
) -> Result<f64, DecodeError> {
    let steps = lattice.steps();
    conventions.check_length(steps, tokens.len())?;
    for &tok in tokens {
        check_token(lattice, tok)?;
    }
    let last = conventions.last_content_step(steps);

    // alpha[s]: log mass of the prefix so far with its last token at step s.
    let mut alpha = conventions.start_scores(lattice);
    let mut next = vec![f64::NEG_INFINITY; steps + 1];
    let mut terms = Vec::with_capacity(steps);
    for &tok in tokens {
        next.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        for s in 2..=last {
            let w = lattice.word_logprob(s, tok);
            if w == f64::NEG_INFINITY {
                continue;
            }
            terms.clear();
            terms.extend(
                (1..s)
                    .filter(|&p| alpha[p] > f64::NEG_INFINITY)
                    .map(|p| alpha[p] + lattice.link_logprob(p, s)),
            );
            next[s] = w + logsumexp(&terms);
        }
        std::mem::swap(&mut alpha, &mut next);
    }

    terms.clear();
    terms.extend(
        (2..=last)
            .filter(|&s| alpha[s] > f64::NEG_INFINITY)
            .map(|s| alpha[s] + conventions.closing_logprob(lattice, s)),
    );
    Ok(logsumexp(&terms))
}
