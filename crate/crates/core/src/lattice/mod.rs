//! The DAT lattice data model.
//!
//! Steps are numbered `1..=S` throughout the public API. Step `s` carries a
//! word log-distribution over the vocabulary and, for `s < S`, a link
//! log-distribution over the later steps `s+1..=S`. Links only point forward;
//! the sparse storage makes backward links unrepresentable.
//!
//! Probability zero is `f64::NEG_INFINITY`.

mod generate;
mod io;

pub mod fixtures;

pub use generate::{generate, GenSpec};
pub use io::{read_lattice, read_lattice_with, serde_logprob, write_lattice, ReadOptions};

use std::collections::HashSet;
use std::fmt;

use crate::error::LatticeError;
use crate::prob::logsumexp;

pub type TokenId = usize;

/// Normalization tolerance applied to every word and link row.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    bos_id: TokenId,
    eos_id: TokenId,
}

impl Vocab {
    pub fn new(
        tokens: Vec<String>,
        bos_id: TokenId,
        eos_id: TokenId,
    ) -> Result<Self, LatticeError> {
        if tokens.is_empty() {
            return Err(LatticeError::schema("vocab", "vocabulary is empty"));
        }
        let mut seen = HashSet::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(LatticeError::schema(format!("vocab[{i}]"), "empty token"));
            }
            if !seen.insert(tok.as_str()) {
                return Err(LatticeError::schema(
                    format!("vocab[{i}]"),
                    format!("duplicate token {tok:?}"),
                ));
            }
        }
        for (field, id) in [("bos_id", bos_id), ("eos_id", eos_id)] {
            if id >= tokens.len() {
                return Err(LatticeError::schema(
                    field,
                    format!("{id} is out of range for {} tokens", tokens.len()),
                ));
            }
        }
        if bos_id == eos_id {
            return Err(LatticeError::schema(
                "eos_id",
                "bos_id and eos_id must differ",
            ));
        }
        Ok(Self {
            tokens,
            bos_id,
            eos_id,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn bos_id(&self) -> TokenId {
        self.bos_id
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id == self.bos_id || id == self.eos_id
    }

    /// Token ids excluding bos and eos, in increasing order.
    pub fn content_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len()).filter(move |&id| !self.is_special(id))
    }

    pub fn content_len(&self) -> usize {
        self.tokens.len() - 2
    }

    pub fn render(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| {
                self.tokens
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| format!("<{id}>"))
            })
            .collect()
    }
}

/// Owned, unchecked components of a lattice. Rows are positional: index 0 of
/// `word_logprobs` is step 1, and `link_logprobs[i]` holds the links out of
/// step `i + 1` to steps `i + 2..=S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParts {
    pub vocab: Vocab,
    pub word_logprobs: Vec<Vec<f64>>,
    pub link_logprobs: Vec<Vec<f64>>,
    pub source_len: Option<usize>,
    pub source_tokens: Option<Vec<String>>,
}

/// A structurally well-formed lattice. Construction checks shapes only; call
/// [`DatLattice::validate`] for the distributional invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct DatLattice {
    steps: usize,
    vocab: Vocab,
    words: Vec<f64>,
    links: Vec<Vec<f64>>,
    source_len: Option<usize>,
    source_tokens: Option<Vec<String>>,
}

impl DatLattice {
    pub fn new(parts: LatticeParts) -> Result<Self, LatticeError> {
        let LatticeParts {
            vocab,
            word_logprobs,
            link_logprobs,
            source_len,
            source_tokens,
        } = parts;
        let steps = word_logprobs.len();
        if steps == 0 {
            return Err(LatticeError::schema(
                "word_logprobs",
                "at least one step is required",
            ));
        }
        let width = vocab.len();
        let mut words = Vec::with_capacity(steps * width);
        for (i, row) in word_logprobs.iter().enumerate() {
            if row.len() != width {
                return Err(LatticeError::schema(
                    format!("word_logprobs[{i}]"),
                    format!("expected {width} entries, found {}", row.len()),
                ));
            }
            words.extend_from_slice(row);
        }
        if link_logprobs.len() != steps - 1 {
            return Err(LatticeError::schema(
                "link_logprobs",
                format!("expected {} rows, found {}", steps - 1, link_logprobs.len()),
            ));
        }
        for (i, row) in link_logprobs.iter().enumerate() {
            let expected = steps - 1 - i;
            if row.len() != expected {
                return Err(LatticeError::schema(
                    format!("link_logprobs[{i}]"),
                    format!("expected {expected} entries, found {}", row.len()),
                ));
            }
        }
        if source_len == Some(0) {
            return Err(LatticeError::schema("source_len", "must be positive"));
        }
        Ok(Self {
            steps,
            vocab,
            words,
            links: link_logprobs,
            source_len,
            source_tokens,
        })
    }

    pub fn to_parts(&self) -> LatticeParts {
        LatticeParts {
            vocab: self.vocab.clone(),
            word_logprobs: (1..=self.steps)
                .map(|s| self.word_row(s).to_vec())
                .collect(),
            link_logprobs: self.links.clone(),
            source_len: self.source_len,
            source_tokens: self.source_tokens.clone(),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn source_len(&self) -> Option<usize> {
        self.source_len
    }

    pub fn source_tokens(&self) -> Option<&[String]> {
        self.source_tokens.as_deref()
    }

    /// Word log-probabilities at `step` (1-based), indexed by token id.
    pub fn word_row(&self, step: usize) -> &[f64] {
        let width = self.vocab.len();
        let start = (step - 1) * width;
        &self.words[start..start + width]
    }

    pub fn word_logprob(&self, step: usize, token: TokenId) -> f64 {
        self.word_row(step)[token]
    }

    /// Link log-probabilities out of `from`; entry `k` is the link to
    /// `from + 1 + k`. Empty for the final step.
    pub fn link_row(&self, from: usize) -> &[f64] {
        if from >= self.steps {
            &[]
        } else {
            &self.links[from - 1]
        }
    }

    /// `ln l(from, to)`; zero probability for any non-forward pair.
    pub fn link_logprob(&self, from: usize, to: usize) -> f64 {
        if from == 0 || to <= from || to > self.steps {
            f64::NEG_INFINITY
        } else {
            self.links[from - 1][to - from - 1]
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_rows(self)
    }
}

/// Which family of rows a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Word,
    Link,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowKind::Word => "word",
            RowKind::Link => "link",
        })
    }
}

/// One violated invariant. Steps are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotNormalized {
        kind: RowKind,
        step: usize,
        logsumexp: f64,
    },
    PositiveLogProb {
        kind: RowKind,
        step: usize,
        index: usize,
        value: f64,
    },
    NotFinite {
        kind: RowKind,
        step: usize,
        index: usize,
        value: f64,
    },
    SourceMismatch {
        source_len: usize,
        source_tokens: usize,
    },
}

impl Violation {
    /// Size of the violation in its natural unit (log-mass for rows,
    /// token count for source metadata).
    pub fn magnitude(&self) -> f64 {
        match *self {
            Violation::NotNormalized { logsumexp, .. } => logsumexp.abs(),
            Violation::PositiveLogProb { value, .. } => value,
            Violation::NotFinite { .. } => f64::INFINITY,
            Violation::SourceMismatch {
                source_len,
                source_tokens,
            } => source_len.abs_diff(source_tokens) as f64,
        }
    }

    pub fn step(&self) -> Option<usize> {
        match *self {
            Violation::NotNormalized { step, .. }
            | Violation::PositiveLogProb { step, .. }
            | Violation::NotFinite { step, .. } => Some(step),
            Violation::SourceMismatch { .. } => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotNormalized {
                kind,
                step,
                logsumexp,
            } => write!(
                f,
                "step {step}: {kind} row logsumexp is {logsumexp:e}, expected 0"
            ),
            Violation::PositiveLogProb {
                kind,
                step,
                index,
                value,
            } => write!(f, "step {step}: {kind} entry {index} is {value:e} > 0"),
            Violation::NotFinite {
                kind,
                step,
                index,
                value,
            } => write!(f, "step {step}: {kind} entry {index} is {value}"),
            Violation::SourceMismatch {
                source_len,
                source_tokens,
            } => write!(
                f,
                "source_len {source_len} disagrees with {source_tokens} source tokens"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct steps with at least one violation, ascending.
    pub fn steps_flagged(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = self.violations.iter().filter_map(Violation::step).collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {v}")?;
        }
        Ok(())
    }
}

fn check_row(kind: RowKind, step: usize, row: &[f64], out: &mut Vec<Violation>) {
    let mut entries_ok = true;
    for (index, &value) in row.iter().enumerate() {
        if value.is_nan() || value == f64::INFINITY {
            out.push(Violation::NotFinite {
                kind,
                step,
                index,
                value,
            });
            entries_ok = false;
        } else if value > NORMALIZATION_TOLERANCE {
            out.push(Violation::PositiveLogProb {
                kind,
                step,
                index,
                value,
            });
        }
    }
    if entries_ok {
        let total = logsumexp(row);
        if total.is_nan() || total.abs() > NORMALIZATION_TOLERANCE {
            out.push(Violation::NotNormalized {
                kind,
                step,
                logsumexp: total,
            });
        }
    }
}

fn validate_rows(lattice: &DatLattice) -> ValidationReport {
    let mut violations = Vec::new();
    for step in 1..=lattice.steps {
        check_row(RowKind::Word, step, lattice.word_row(step), &mut violations);
        if step < lattice.steps {
            check_row(RowKind::Link, step, lattice.link_row(step), &mut violations);
        }
    }
    if let (Some(source_len), Some(tokens)) = (lattice.source_len, &lattice.source_tokens) {
        if source_len != tokens.len() {
            violations.push(Violation::SourceMismatch {
                source_len,
                source_tokens: tokens.len(),
            });
        }
    }
    ValidationReport { violations }
}
