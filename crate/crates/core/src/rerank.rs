//! Selecting the final output from a beam's candidate list.
//!
//! A [`Reranker`] sees the whole list at once, so a scorer can compare
//! candidates against each other as well as against the context.

use std::collections::HashMap;

use crate::lattice::Vocab;
use crate::prob::ScoredSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tokens: Vec<String>,
    /// Beam score (beam total, or exact marginal when no beam was run).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    candidates: Vec<Candidate>,
    pub context: Option<Vec<String>>,
    pub reference: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CandidateListError {
    #[error("candidate list is empty")]
    Empty,
    #[error("candidates {0} and {1} are identical")]
    Duplicate(usize, usize),
}

impl CandidateList {
    /// Candidates in beam order, rank 1 first. Must be non-empty and
    /// pairwise distinct.
    pub fn new(candidates: Vec<Candidate>) -> Result<Self, CandidateListError> {
        if candidates.is_empty() {
            return Err(CandidateListError::Empty);
        }
        let mut seen: HashMap<&[String], usize> = HashMap::new();
        for (i, c) in candidates.iter().enumerate() {
            if let Some(&j) = seen.get(c.tokens.as_slice()) {
                return Err(CandidateListError::Duplicate(j, i));
            }
            seen.insert(&c.tokens, i);
        }
        Ok(Self {
            candidates,
            context: None,
            reference: None,
        })
    }

    pub fn from_decoded(
        sequences: &[ScoredSequence],
        vocab: &Vocab,
    ) -> Result<Self, CandidateListError> {
        Self::new(
            sequences
                .iter()
                .map(|s| Candidate {
                    tokens: vocab.render(&s.tokens),
                    score: s.ranking_score(),
                })
                .collect(),
        )
    }

    pub fn with_context(mut self, context: Vec<String>) -> Self {
        self.context = Some(context);
        self
    }

    pub fn with_reference(mut self, reference: Vec<String>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

pub trait Reranker {
    /// Index of the selected candidate; always in bounds.
    fn select(&self, list: &CandidateList) -> usize;
}

/// Index of the maximum key, earliest on ties.
fn first_argmax<K: PartialOrd>(keys: impl Iterator<Item = K>) -> usize {
    let mut best: Option<(usize, K)> = None;
    for (i, k) in keys.enumerate() {
        if best.as_ref().is_none_or(|(_, b)| k > *b) {
            best = Some((i, k));
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// Highest beam score; ties to the better beam rank.
pub fn rerank_marginal(list: &CandidateList) -> usize {
    first_argmax(list.candidates.iter().map(|c| c.score))
}

/// Size of the multiset intersection after lowercasing.
pub fn overlap_count(candidate: &[String], reference: &[String]) -> usize {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for tok in reference {
        *counts.entry(tok.to_lowercase()).or_insert(0) += 1;
    }
    let mut overlap = 0;
    for tok in candidate {
        if let Some(c) = counts.get_mut(&tok.to_lowercase()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

/// Most words shared with `reference`; ties to the better beam rank.
pub fn rerank_overlap(list: &CandidateList, reference: &[String]) -> usize {
    first_argmax(
        list.candidates
            .iter()
            .map(|c| overlap_count(&c.tokens, reference)),
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MarginalReranker;

impl Reranker for MarginalReranker {
    fn select(&self, list: &CandidateList) -> usize {
        rerank_marginal(list)
    }
}

/// Picks by word overlap with a fixed reference, or with the list's own
/// reference when none is given. Falls back to beam rank 1 without either.
#[derive(Debug, Clone, Default)]
pub struct OverlapReranker {
    pub reference: Option<Vec<String>>,
}

impl Reranker for OverlapReranker {
    fn select(&self, list: &CandidateList) -> usize {
        match self.reference.as_deref().or(list.reference.as_deref()) {
            Some(reference) => rerank_overlap(list, reference),
            None => 0,
        }
    }
}

/// Keeps beam order.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn select(&self, _list: &CandidateList) -> usize {
        0
    }
}
