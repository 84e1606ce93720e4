use thiserror::Error;

use crate::lattice::ValidationReport;
use crate::prob::TerminationMode;

#[derive(Debug, Error)]
pub enum LatticeError {
    /// The document or the parts handed to the constructor have the wrong
    /// structure. `field` names the offending field (a JSON path for files).
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("invalid lattice distributions:\n{0}")]
    Invalid(ValidationReport),

    #[error("invalid generator settings: {0}")]
    GenSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LatticeError {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        LatticeError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("token sequence must contain at least one content token")]
    EmptySequence,

    #[error(
        "length {length} is infeasible with {steps} steps in {termination} mode \
         (at most {max} content tokens fit)"
    )]
    InfeasibleLength {
        length: usize,
        steps: usize,
        max: usize,
        termination: TerminationMode,
    },

    #[error("step {step} is out of range 1..={steps}")]
    StepOutOfRange { step: usize, steps: usize },

    #[error("token id {token} is out of range for a vocabulary of {vocab_size}")]
    TokenOutOfRange { token: usize, vocab_size: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("every length-{0} path has zero probability")]
    NoValidPath(usize),

    #[error("every length-{0} beam candidate has zero probability")]
    NoValidSequence(usize),

    #[error("invalid decode configuration: {0}")]
    InvalidConfig(String),

    #[error("ratio length requires `source_len` in the lattice")]
    MissingSourceLen,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("brute-force enumeration refused: {0}")]
    TooLarge(String),

    #[error("invalid oracle request: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("hypothesis is empty")]
    EmptyHypothesis,
}
