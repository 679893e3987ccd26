//! Crate-wide error type and process exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("vertex count mismatch: {left} vs {right}")]
    VertexCountMismatch { left: usize, right: usize },

    #[error("non-manifold vertex {0}: one-ring is not a single fan")]
    NonManifoldVertex(usize),

    #[error("decimation stuck at {achieved} vertices (target {target})")]
    DecimationStuck { achieved: usize, target: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("gather index {index} out of range (rows = {rows})")]
    GatherOutOfRange { index: usize, rows: usize },

    #[error("{op} of non-positive value {value}")]
    DomainError { op: &'static str, value: f64 },

    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,

    #[error("no second-order support for op {0}")]
    SecondOrderUnsupported(&'static str),

    #[error("missing gradients for parameters: {0}")]
    MissingGradient(String),

    #[error("non-finite loss in term `{term}` at step {step}")]
    NonFiniteLoss { term: &'static str, step: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 validation, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteLoss { .. } => 3,
            Error::Io(_) | Error::Parse(_) => 4,
            _ => 2,
        }
    }
}
