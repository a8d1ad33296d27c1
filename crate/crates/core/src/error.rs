use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition of an operation was violated by its input.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid flag signature: {0}")]
    InvalidSignature(String),

    #[error("spectrum does not match the block pattern: {0}")]
    InvalidSpectrum(String),

    /// Input is not generic enough for the closed-form enumeration.
    #[error("genericity violated: {0}")]
    Genericity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported conversion from {from} to {to}")]
    UnsupportedEdge { from: String, to: String },

    /// A computed point failed the invariants of its own model.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("point is not on the variety (residual {residual:.3e})")]
    OffVariety { residual: f64 },

    #[error("system is not square: {equations} equations in {variables} variables")]
    NotSquare { equations: usize, variables: usize },

    #[error("integer overflow while computing {0}")]
    Overflow(String),

    #[error("invalid tracker configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
