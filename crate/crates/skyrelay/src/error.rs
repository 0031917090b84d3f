//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator, learner, and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input was NaN or infinite where a finite value is required.
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    /// A geometric quantity was outside its valid domain (e.g. zero slant range).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),

    /// A value violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An aggregate was requested over an empty or zero-measure window.
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    /// A timestamp moved backwards relative to the tracked clock.
    #[error("out-of-order timestamp: got {got}, clock at {clock}")]
    OutOfOrder { got: u32, clock: u32 },

    /// A joint action was not in the feasible set of the current state.
    #[error("infeasible action: {0}")]
    InfeasibleAction(String),

    /// Tensor/vector shapes disagreed.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// Training produced a non-finite loss; the run cannot continue.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A stored artifact (network file, trace log) was malformed.
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
