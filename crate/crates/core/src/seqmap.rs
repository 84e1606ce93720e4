//! SeqMAP: beam dynamic programming for the most probable length-`T`
//! *sequence*, marginalizing over the steps that emit it.
//!
//! `A(t, s)` holds up to `K` length-`t` sequences generated at or before step
//! `s`. Every entry keeps a support map `s' -> ln u_{s'}(b)`, the mass of
//! emitting `b` with its last token exactly at `s'`. One DP step is
//!
//! ```text
//! B(t, s) = top-K { b ⊕ v : b ∈ A(t-1, s-1), v ∈ top-V words at s }
//!           u_s(b ⊕ v) = w(s, v) · Σ_{s'} u_{s'}(b) · l(s', s)
//! A(t, s) = top-K { A(t, s-1) ∪ B(t, s) }     ranked by Σ_{s'} u_{s'}(b)
//! ```
//!
//! In eos mode the length-`T` layer also carries the closing factor
//! `l(s, S) · w(S, eos)`, so the last truncations rank complete sequences.
//!
//! The union is by token sequence: an entry present on both sides keeps one
//! row with both supports. Ties in any ranking go to the lexicographically
//! smaller token sequence.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::DecodeError;
use crate::lattice::{DatLattice, TokenId};
use crate::prob::{
    log_add, logsumexp, sequence_log_marginal, BosPolicy, Conventions, ScoredSequence,
};

pub const DEFAULT_BEAM: usize = 20;
pub const DEFAULT_EXPAND: usize = 5;

/// A candidate sequence and its per-end-step log masses, sorted by step.
/// Zero-mass steps are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamEntry {
    pub tokens: Vec<TokenId>,
    pub support: Vec<(usize, f64)>,
}

impl BeamEntry {
    pub fn total(&self) -> f64 {
        logsumexp(&self.support.iter().map(|&(_, u)| u).collect::<Vec<_>>())
    }

    pub fn score_at(&self, step: usize) -> Option<f64> {
        self.support
            .binary_search_by_key(&step, |&(s, _)| s)
            .ok()
            .map(|i| self.support[i].1)
    }
}

/// At most `K` entries with pairwise distinct token sequences, in rank order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeamCell {
    entries: Vec<BeamEntry>,
}

impl BeamCell {
    pub fn entries(&self) -> &[BeamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, tokens: &[TokenId]) -> Option<&BeamEntry> {
        self.entries.iter().find(|e| e.tokens == tokens)
    }

    /// The length-0 cell `A(0, step)` holding only the bos prefix.
    pub fn initial(lattice: &DatLattice, bos: BosPolicy, step: usize) -> Self {
        let support = match bos {
            BosPolicy::Strict => {
                let w = lattice.word_logprob(1, lattice.vocab().bos_id());
                if w > f64::NEG_INFINITY && step >= 1 {
                    vec![(1, w)]
                } else {
                    Vec::new()
                }
            }
            BosPolicy::Verbatim => (1..=step.min(lattice.steps())).map(|s| (s, 0.0)).collect(),
        };
        if support.is_empty() {
            return Self::default();
        }
        Self {
            entries: vec![BeamEntry {
                tokens: Vec::new(),
                support,
            }],
        }
    }

    /// Ranks by total descending, tokens ascending, and keeps the best `beam`.
    fn ranked(entries: Vec<BeamEntry>, beam: usize) -> Self {
        let mut keyed: Vec<(f64, BeamEntry)> =
            entries.into_iter().map(|e| (e.total(), e)).collect();
        keyed.sort_by(|a, b| rank_order(a.0, &a.1.tokens, b.0, &b.1.tokens));
        keyed.truncate(beam);
        Self {
            entries: keyed.into_iter().map(|(_, e)| e).collect(),
        }
    }
}

fn rank_order(sa: f64, ta: &[TokenId], sb: f64, tb: &[TokenId]) -> Ordering {
    sb.total_cmp(&sa).then_with(|| ta.cmp(tb))
}

/// Content words at `step` with nonzero probability, most probable first
/// (ties to the smaller id), at most `width` of them.
pub fn top_words(lattice: &DatLattice, step: usize, width: usize) -> Vec<(TokenId, f64)> {
    let row = lattice.word_row(step);
    let mut words: Vec<(TokenId, f64)> = lattice
        .vocab()
        .content_ids()
        .map(|id| (id, row[id]))
        .filter(|&(_, w)| w > f64::NEG_INFINITY)
        .collect();
    words.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    words.truncate(width);
    words
}

fn expand_with(
    lattice: &DatLattice,
    prev: &BeamCell,
    step: usize,
    words: &[(TokenId, f64)],
    closing: f64,
    beam: usize,
) -> BeamCell {
    let mut children: HashMap<Vec<TokenId>, f64> = HashMap::new();
    let mut terms = Vec::new();
    for entry in &prev.entries {
        terms.clear();
        terms.extend(
            entry
                .support
                .iter()
                .take_while(|&&(s, _)| s < step)
                .map(|&(s, u)| u + lattice.link_logprob(s, step)),
        );
        let reach = logsumexp(&terms) + closing;
        if reach == f64::NEG_INFINITY {
            continue;
        }
        for &(word, w) in words {
            let mut tokens = Vec::with_capacity(entry.tokens.len() + 1);
            tokens.extend_from_slice(&entry.tokens);
            tokens.push(word);
            let u = w + reach;
            children
                .entry(tokens)
                .and_modify(|m| *m = log_add(*m, u))
                .or_insert(u);
        }
    }
    let entries = children
        .into_iter()
        .map(|(tokens, u)| BeamEntry {
            tokens,
            support: vec![(step, u)],
        })
        .collect();
    BeamCell::ranked(entries, beam)
}

/// `B(t, s)`: extends every entry of `A(t-1, s-1)` with the top-`width`
/// content words at `step`, keeping the best `beam` children by `u_s`.
pub fn expand(
    lattice: &DatLattice,
    prev: &BeamCell,
    step: usize,
    width: usize,
    beam: usize,
) -> BeamCell {
    expand_with(
        lattice,
        prev,
        step,
        &top_words(lattice, step, width),
        0.0,
        beam,
    )
}

/// `A(t, s)` from `B(t, s)` and `A(t, s-1)`: union by token sequence with
/// supports combined, ranked by total mass, truncated to `beam`.
pub fn merge(exact: BeamCell, left: &BeamCell, beam: usize) -> BeamCell {
    if exact.is_empty() {
        return BeamCell::ranked(left.entries.clone(), beam);
    }
    let mut index: HashMap<Vec<TokenId>, usize> = HashMap::with_capacity(left.len() + exact.len());
    let mut entries: Vec<BeamEntry> = Vec::with_capacity(left.len() + exact.len());
    for entry in left.entries.iter().cloned().chain(exact.entries) {
        match index.get(&entry.tokens) {
            Some(&i) => {
                let support = &mut entries[i].support;
                for (s, u) in entry.support {
                    match support.binary_search_by_key(&s, |&(k, _)| k) {
                        Ok(j) => support[j].1 = log_add(support[j].1, u),
                        Err(j) => support.insert(j, (s, u)),
                    }
                }
            }
            None => {
                index.insert(entry.tokens.clone(), entries.len());
                entries.push(entry);
            }
        }
    }
    BeamCell::ranked(entries, beam)
}

type MergeFn = fn(BeamCell, &BeamCell, usize) -> BeamCell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthSpec {
    Tokens(usize),
    /// Target length as a fraction of the lattice's `source_len`,
    /// `max(1, floor(ratio * source_len))`.
    Ratio(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub beam: usize,
    pub expand: usize,
    pub conventions: Conventions,
    pub length: LengthSpec,
}

impl DecodeConfig {
    pub fn new(length: usize) -> Self {
        Self {
            beam: DEFAULT_BEAM,
            expand: DEFAULT_EXPAND,
            conventions: Conventions::default(),
            length: LengthSpec::Tokens(length),
        }
    }

    pub fn with_beam(mut self, beam: usize, expand: usize) -> Self {
        self.beam = beam;
        self.expand = expand;
        self
    }

    pub fn with_conventions(mut self, conventions: Conventions) -> Self {
        self.conventions = conventions;
        self
    }

    pub fn resolve_length(&self, lattice: &DatLattice) -> Result<usize, DecodeError> {
        resolve_length(self.length, lattice)
    }

    fn check(&self, lattice: &DatLattice) -> Result<usize, DecodeError> {
        if self.beam == 0 {
            return Err(DecodeError::InvalidConfig(
                "beam size must be at least 1".into(),
            ));
        }
        if self.expand == 0 || self.expand > lattice.vocab().len() {
            return Err(DecodeError::InvalidConfig(format!(
                "expansion width must be in 1..={}, got {}",
                lattice.vocab().len(),
                self.expand
            )));
        }
        let length = self.resolve_length(lattice)?;
        self.conventions.check_length(lattice.steps(), length)?;
        Ok(length)
    }
}

pub fn resolve_length(spec: LengthSpec, lattice: &DatLattice) -> Result<usize, DecodeError> {
    match spec {
        LengthSpec::Tokens(t) => Ok(t),
        LengthSpec::Ratio(r) => {
            if !(r.is_finite() && r > 0.0) {
                return Err(DecodeError::InvalidConfig(format!(
                    "ratio must be positive, got {r}"
                )));
            }
            let source = lattice.source_len().ok_or(DecodeError::MissingSourceLen)?;
            Ok(((r * source as f64).floor() as usize).max(1))
        }
    }
}

/// Column-at-a-time driver over the `(t, s)` table. Only the previous column
/// is kept; cells that cannot reach `A(T, last)` are left empty.
struct Search<'a> {
    lattice: &'a DatLattice,
    bos: BosPolicy,
    length: usize,
    beam: usize,
    last: usize,
    words: Vec<Vec<(TokenId, f64)>>,
    /// Closing factor per end step, folded into the length-`T` layer.
    closing: Vec<f64>,
    merge: MergeFn,
    step: usize,
    column: Vec<BeamCell>,
}

impl<'a> Search<'a> {
    fn new(lattice: &'a DatLattice, config: &DecodeConfig, length: usize, merge: MergeFn) -> Self {
        let last = config.conventions.last_content_step(lattice.steps());
        let words = (0..=last)
            .map(|s| {
                if s < 2 {
                    Vec::new()
                } else {
                    top_words(lattice, s, config.expand)
                }
            })
            .collect();
        let closing = (0..=last)
            .map(|s| {
                if s < 2 {
                    f64::NEG_INFINITY
                } else {
                    config.conventions.closing_logprob(lattice, s)
                }
            })
            .collect();
        let mut column = vec![BeamCell::default(); length + 1];
        column[0] = BeamCell::initial(lattice, config.conventions.bos, 1);
        Self {
            lattice,
            bos: config.conventions.bos,
            length,
            beam: config.beam,
            last,
            words,
            closing,
            merge,
            step: 1,
            column,
        }
    }

    // DP tables are indexed by step on purpose.
    #[allow(clippy::needless_range_loop)]
    fn advance(&mut self) {
        let s = self.step + 1;
        let mut next = vec![BeamCell::default(); self.length + 1];
        next[0] = BeamCell::initial(self.lattice, self.bos, s);
        for t in 1..=self.length.min(s - 1) {
            if s + (self.length - t) > self.last {
                continue;
            }
            let closing = if t == self.length {
                self.closing[s]
            } else {
                0.0
            };
            let exact = expand_with(
                self.lattice,
                &self.column[t - 1],
                s,
                &self.words[s],
                closing,
                self.beam,
            );
            next[t] = (self.merge)(exact, &self.column[t], self.beam);
        }
        self.column = next;
        self.step = s;
    }

    fn run(mut self) -> BeamCell {
        while self.step < self.last {
            self.advance();
        }
        self.column.swap_remove(self.length)
    }
}

/// The cells `A(0..=T, step)` as the decoder computes them. Exposed for
/// inspection and testing.
pub fn column_at(
    lattice: &DatLattice,
    config: &DecodeConfig,
    step: usize,
) -> Result<Vec<BeamCell>, DecodeError> {
    let length = config.check(lattice)?;
    let mut search = Search::new(lattice, config, length, merge);
    while search.step < step.min(search.last) {
        search.advance();
    }
    Ok(search.column)
}

/// The length-`T` supports already include the closing factor, so each
/// entry's total is its beam score for the complete sequence.
fn finalize(
    lattice: &DatLattice,
    conventions: Conventions,
    cell: BeamCell,
    beam: usize,
) -> Result<Vec<ScoredSequence>, DecodeError> {
    let mut finished: Vec<(f64, Vec<TokenId>)> = cell
        .entries
        .into_iter()
        .map(|entry| (entry.total(), entry.tokens))
        .filter(|(total, _)| *total > f64::NEG_INFINITY)
        .collect();
    finished.sort_by(|a, b| rank_order(a.0, &a.1, b.0, &b.1));
    finished.truncate(beam);
    finished
        .into_iter()
        .map(|(total, tokens)| {
            let log_marginal = sequence_log_marginal(lattice, &tokens, conventions)?;
            Ok(ScoredSequence {
                tokens,
                log_marginal,
                log_best_path: None,
                beam_total: Some(total),
            })
        })
        .collect()
}

pub(crate) fn decode_with_merge(
    lattice: &DatLattice,
    config: &DecodeConfig,
    merge: MergeFn,
) -> Result<Vec<ScoredSequence>, DecodeError> {
    let length = config.check(lattice)?;
    let cell = Search::new(lattice, config, length, merge).run();
    let out = finalize(lattice, config.conventions, cell, config.beam)?;
    if out.is_empty() {
        return Err(DecodeError::NoValidSequence(length));
    }
    Ok(out)
}

/// Runs the beam DP and returns up to `K` candidates, best beam total first.
/// Each candidate carries its beam total and its exact recomputed marginal.
pub fn seqmap_decode(
    lattice: &DatLattice,
    config: &DecodeConfig,
) -> Result<Vec<ScoredSequence>, DecodeError> {
    decode_with_merge(lattice, config, merge)
}

/// Merge that concatenates both cells without combining shared sequences.
/// Only for mutation tests: proves the suite notices a broken union.
#[cfg(test)]
pub(crate) fn merge_without_dedup(exact: BeamCell, left: &BeamCell, beam: usize) -> BeamCell {
    let mut entries = left.entries.clone();
    entries.extend(exact.entries);
    BeamCell::ranked(entries, beam)
}

#[cfg(test)]
pub(crate) fn seqmap_decode_without_dedup(
    lattice: &DatLattice,
    config: &DecodeConfig,
) -> Result<Vec<ScoredSequence>, DecodeError> {
    decode_with_merge(lattice, config, merge_without_dedup)
}
