use thiserror::Error;

/// Errors produced by graph construction, model fitting, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("negative similarity weight {weight} on edge ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("self-loop on node {node}: similarity matrices must have zero diagonal")]
    SelfLoop { node: usize },

    #[error("duplicate edge ({i}, {j}) in similarity layer")]
    DuplicateEdge { i: usize, j: usize },

    #[error("index {index} out of bounds ({bound})")]
    IndexOutOfBounds { index: usize, bound: usize },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("label required at step {step}, node {node}, but it is missing")]
    MissingLabel { step: usize, node: usize },

    #[error("the labeled set is empty")]
    EmptyLabeledSet,

    #[error("objective is not finite: {context}")]
    NonFiniteObjective { context: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
