//! Length-controlled decoding over directed acyclic transformer (DAT) output
//! lattices.
//!
//! A [`DatLattice`] holds, for each of `S` prediction steps, a word
//! distribution over the vocabulary and a link distribution over later steps.
//! Two decoders read fixed-length outputs off the lattice:
//!
//! - [`pathmap`]: exact Viterbi-style search for the single most probable
//!   path (links and words jointly maximized).
//! - [`seqmap`]: beam dynamic program that approximately maximizes the
//!   *sequence* probability, marginalizing over all linked steps.
//!
//! [`oracle`] provides brute-force linear-space references for both, and
//! [`verify`] bundles the cross-checks into a reusable property suite.
//! [`rerank`] selects among beam candidates and [`metrics`] scores outputs
//! against references.

pub mod error;
pub mod lattice;
pub mod metrics;
pub mod oracle;
pub mod pathmap;
pub mod prob;
pub mod rerank;
pub mod rng;
pub mod seqmap;
pub mod verify;

pub use error::{DecodeError, LatticeError, MetricsError, OracleError};
pub use lattice::{
    fixtures, generate, read_lattice, read_lattice_with, write_lattice, DatLattice, GenSpec,
    LatticeParts, ReadOptions, TokenId, ValidationReport, Violation, Vocab,
};
pub use pathmap::pathmap_decode;
pub use prob::{
    logsumexp, path_logprob, sequence_log_marginal, BosPolicy, Conventions, Path, ScoredSequence,
    TerminationMode,
};
pub use rerank::{CandidateList, Reranker};
pub use seqmap::{seqmap_decode, DecodeConfig, LengthSpec};
