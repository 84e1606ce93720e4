//! Brute-force references for small lattices.
//!
//! Everything here enumerates placements and word choices explicitly and
//! multiplies probabilities in linear space, with compensated summation. It
//! shares no arithmetic with the log-space kernels it checks, only the
//! lattice accessors and the [`Conventions`] step ranges.
//!
//! Sizes are capped; exceeding a cap is an error, never a silent truncation.

use std::cmp::Ordering;

use crate::error::{DecodeError, OracleError};
use crate::lattice::{DatLattice, TokenId};
use crate::prob::{BosPolicy, Conventions, Path, ScoredSequence, TerminationMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_steps: usize,
    pub max_length: usize,
    /// Cap on `|content vocab|^T` for [`oracle_seqmap`].
    pub max_sequences: usize,
    /// Cap on placements × word choices for any single enumeration.
    pub max_items: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_steps: 10,
            max_length: 6,
            max_sequences: 4096,
            max_items: 20_000_000,
        }
    }
}

/// Which words a path enumeration tries at each content position.
#[derive(Debug, Clone, Copy)]
pub enum WordChoice<'a> {
    /// Every content token (bos and eos excluded).
    Content,
    /// Every token in the vocabulary.
    AnyToken,
    /// One fixed sequence.
    Fixed(&'a [TokenId]),
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn saturating_pow(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

/// Calls `f` with every strictly increasing `k`-subset of `lo..=hi`.
fn for_each_combination(lo: usize, hi: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(next: usize, hi: usize, k: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if buf.len() == k {
            f(buf);
            return;
        }
        let remaining = k - buf.len();
        let mut s = next;
        while s + remaining <= hi + 1 {
            buf.push(s);
            rec(s + 1, hi, k, buf, f);
            buf.pop();
            s += 1;
        }
    }
    let mut buf = Vec::with_capacity(k);
    rec(lo, hi, k, &mut buf, f);
}

/// Calls `f` with every sequence in `alphabet^len`, lexicographic in
/// alphabet order.
fn for_each_sequence(alphabet: &[TokenId], len: usize, f: &mut impl FnMut(&[TokenId])) {
    if len > 0 && alphabet.is_empty() {
        return;
    }
    let mut idx = vec![0usize; len];
    let mut seq: Vec<TokenId> = vec![alphabet.first().copied().unwrap_or(0); len];
    loop {
        f(&seq);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < alphabet.len() {
                seq[pos] = alphabet[idx[pos]];
                break;
            }
            idx[pos] = 0;
            seq[pos] = alphabet[0];
        }
    }
}

fn prob(logp: f64) -> f64 {
    logp.exp()
}

/// Linear probability of content `tokens` placed at `steps`, with the bos
/// prefix at `bos_step`, under `conventions`.
fn placement_prob(
    lattice: &DatLattice,
    conventions: Conventions,
    bos_step: usize,
    steps: &[usize],
    tokens: &[TokenId],
) -> f64 {
    let vocab = lattice.vocab();
    let mut p = match conventions.bos {
        BosPolicy::Strict => prob(lattice.word_logprob(1, vocab.bos_id())),
        BosPolicy::Verbatim => 1.0,
    };
    let mut prev = bos_step;
    for (&s, &tok) in steps.iter().zip(tokens) {
        p *= prob(lattice.link_logprob(prev, s)) * prob(lattice.word_logprob(s, tok));
        prev = s;
    }
    if conventions.termination == TerminationMode::Eos {
        let last = lattice.steps();
        p *= prob(lattice.link_logprob(prev, last))
            * prob(lattice.word_logprob(last, vocab.eos_id()));
    }
    p
}

fn bos_steps(
    conventions: Conventions,
    first_content: Option<usize>,
    steps: usize,
) -> std::ops::Range<usize> {
    match conventions.bos {
        BosPolicy::Strict => 1..2,
        BosPolicy::Verbatim => {
            let end = first_content.unwrap_or(steps);
            1..end
        }
    }
}

fn check_caps(
    lattice: &DatLattice,
    length: usize,
    conventions: Conventions,
    alphabet_len: usize,
    limits: &OracleLimits,
) -> Result<(), OracleError> {
    let steps = lattice.steps();
    if steps > limits.max_steps {
        return Err(OracleError::TooLarge(format!(
            "{steps} steps exceeds the cap of {}",
            limits.max_steps
        )));
    }
    if length > limits.max_length {
        return Err(OracleError::TooLarge(format!(
            "length {length} exceeds the cap of {}",
            limits.max_length
        )));
    }
    let slots = conventions.last_content_step(steps).saturating_sub(1);
    let bos_options = match conventions.bos {
        BosPolicy::Strict => 1,
        BosPolicy::Verbatim => steps as u128,
    };
    let items = binomial(slots, length)
        .saturating_mul(bos_options)
        .saturating_mul(saturating_pow(alphabet_len, length));
    if items > limits.max_items as u128 {
        return Err(OracleError::TooLarge(format!(
            "C({slots}, {length}) placements x {alphabet_len}^{length} words = {items} \
             exceeds the cap of {}",
            limits.max_items
        )));
    }
    Ok(())
}

fn check_length(
    lattice: &DatLattice,
    length: usize,
    conventions: Conventions,
) -> Result<(), OracleError> {
    if length == 0 {
        let ok = conventions.bos == BosPolicy::Strict
            && (conventions.termination == TerminationMode::Free || lattice.steps() >= 2);
        return if ok {
            Ok(())
        } else {
            Err(DecodeError::EmptySequence.into())
        };
    }
    conventions.check_length(lattice.steps(), length)?;
    Ok(())
}

/// Every path with `length` content positions, paired with its linear
/// probability. Paths include the bos step (and the eos step in eos mode).
/// `length` 0 is accepted under the strict bos policy (bos straight to eos).
pub fn enumerate_paths(
    lattice: &DatLattice,
    length: usize,
    conventions: Conventions,
    words: WordChoice<'_>,
    limits: &OracleLimits,
) -> Result<Vec<(Path, f64)>, OracleError> {
    check_length(lattice, length, conventions)?;
    let vocab = lattice.vocab();
    let alphabet: Vec<TokenId> = match words {
        WordChoice::Content => vocab.content_ids().collect(),
        WordChoice::AnyToken => (0..vocab.len()).collect(),
        WordChoice::Fixed(tokens) => {
            if tokens.len() != length {
                return Err(OracleError::InvalidArgument(format!(
                    "fixed word sequence has {} tokens, expected {length}",
                    tokens.len()
                )));
            }
            Vec::new()
        }
    };
    let alphabet_len = if matches!(words, WordChoice::Fixed(_)) {
        1
    } else {
        alphabet.len()
    };
    check_caps(lattice, length, conventions, alphabet_len, limits)?;

    let steps = lattice.steps();
    let last = conventions.last_content_step(steps);
    let mut out = Vec::new();
    let mut emit = |bos_step: usize, placement: &[usize], tokens: &[TokenId]| {
        let p = placement_prob(lattice, conventions, bos_step, placement, tokens);
        let mut linked = Vec::with_capacity(length + 2);
        linked.push(bos_step);
        linked.extend_from_slice(placement);
        let mut path_words = Vec::with_capacity(length + 2);
        path_words.push(vocab.bos_id());
        path_words.extend_from_slice(tokens);
        if conventions.termination == TerminationMode::Eos {
            linked.push(steps);
            path_words.push(vocab.eos_id());
        }
        let path = Path::new(linked, path_words).expect("enumerated steps are increasing");
        out.push((path, p));
    };
    for_each_combination(2, last, length, &mut |placement| {
        for bos_step in bos_steps(conventions, placement.first().copied(), steps) {
            match words {
                WordChoice::Fixed(tokens) => emit(bos_step, placement, tokens),
                _ => for_each_sequence(&alphabet, length, &mut |tokens| {
                    emit(bos_step, placement, tokens)
                }),
            }
        }
    });
    Ok(out)
}

/// Exact linear marginal of `tokens` by enumeration of placements.
pub fn marginal(
    lattice: &DatLattice,
    tokens: &[TokenId],
    conventions: Conventions,
    limits: &OracleLimits,
) -> Result<f64, OracleError> {
    let paths = enumerate_paths(
        lattice,
        tokens.len(),
        conventions,
        WordChoice::Fixed(tokens),
        limits,
    )?;
    let mut sum = CompensatedSum::default();
    paths.iter().for_each(|&(_, p)| sum.add(p));
    Ok(sum.value())
}

fn content_part(path: &Path, conventions: Conventions) -> (&[usize], &[TokenId]) {
    let n = path.len();
    let end = match conventions.termination {
        TerminationMode::Eos => n - 1,
        TerminationMode::Free => n,
    };
    (&path.linked_steps()[1..end], &path.words()[1..end])
}

/// Order used to break exact ties between equally probable paths: smaller
/// final content step, then smaller linked-step vector, then smaller tokens.
fn path_tie_order(a: &Path, b: &Path, conventions: Conventions) -> Ordering {
    let (sa, ta) = content_part(a, conventions);
    let (sb, tb) = content_part(b, conventions);
    sa.last()
        .cmp(&sb.last())
        .then_with(|| a.linked_steps().cmp(b.linked_steps()))
        .then_with(|| ta.cmp(tb))
}

/// Most probable path over all placements and content words.
pub fn oracle_pathmap(
    lattice: &DatLattice,
    length: usize,
    conventions: Conventions,
    limits: &OracleLimits,
) -> Result<(Path, ScoredSequence), OracleError> {
    conventions.check_length(lattice.steps(), length)?;
    let paths = enumerate_paths(lattice, length, conventions, WordChoice::Content, limits)?;
    let mut best: Option<(Path, f64)> = None;
    for (path, p) in paths {
        if p <= 0.0 {
            continue;
        }
        let replace = match &best {
            None => true,
            Some((bp, bprob)) => match p.partial_cmp(bprob) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => path_tie_order(&path, bp, conventions) == Ordering::Less,
                _ => false,
            },
        };
        if replace {
            best = Some((path, p));
        }
    }
    let (path, p) = best.ok_or(DecodeError::NoValidPath(length))?;
    let tokens = content_part(&path, conventions).1.to_vec();
    let m = marginal(lattice, &tokens, conventions, limits)?;
    Ok((
        path,
        ScoredSequence {
            tokens,
            log_marginal: m.ln(),
            log_best_path: Some(p.ln()),
            beam_total: None,
        },
    ))
}

/// A content sequence with its exact linear marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSequence {
    pub tokens: Vec<TokenId>,
    pub probability: f64,
}

impl OracleSequence {
    pub fn log_marginal(&self) -> f64 {
        self.probability.ln()
    }

    pub fn to_scored(&self) -> ScoredSequence {
        ScoredSequence {
            tokens: self.tokens.clone(),
            log_marginal: self.log_marginal(),
            log_best_path: None,
            beam_total: None,
        }
    }
}

/// Every length-`T` content sequence with its exact marginal, most probable
/// first (ties to the smaller token sequence). Zero-mass sequences are
/// included at the end.
pub fn oracle_seqmap(
    lattice: &DatLattice,
    length: usize,
    conventions: Conventions,
    limits: &OracleLimits,
) -> Result<Vec<OracleSequence>, OracleError> {
    conventions.check_length(lattice.steps(), length)?;
    let alphabet: Vec<TokenId> = lattice.vocab().content_ids().collect();
    let count = saturating_pow(alphabet.len(), length);
    if count > limits.max_sequences as u128 {
        return Err(OracleError::TooLarge(format!(
            "{}^{length} = {count} sequences exceeds the cap of {}",
            alphabet.len(),
            limits.max_sequences
        )));
    }
    check_caps(lattice, length, conventions, alphabet.len(), limits)?;

    let steps = lattice.steps();
    let last = conventions.last_content_step(steps);
    let mut placements: Vec<Vec<usize>> = Vec::new();
    for_each_combination(2, last, length, &mut |p| placements.push(p.to_vec()));

    let mut out = Vec::with_capacity(count as usize);
    for_each_sequence(&alphabet, length, &mut |tokens| {
        let mut sum = CompensatedSum::default();
        for placement in &placements {
            for bos_step in bos_steps(conventions, placement.first().copied(), steps) {
                sum.add(placement_prob(
                    lattice,
                    conventions,
                    bos_step,
                    placement,
                    tokens,
                ));
            }
        }
        out.push(OracleSequence {
            tokens: tokens.to_vec(),
            probability: sum.value(),
        });
    });
    out.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    Ok(out)
}
