//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Cholesky factorisation failed even at the largest jitter level.
    #[error(
        "matrix of order {order} is not positive definite: pivot {pivot:.3e} at row {row} \
         with jitter {jitter:.1e} (largest level tried)"
    )]
    NotPositiveDefinite {
        order: usize,
        row: usize,
        pivot: f64,
        jitter: f64,
    },

    /// Network training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// A composition-structure evaluation left the declared layer domain.
    #[error("composition evaluation left the declared domain at layer {layer}: {value} outside [{lo}, {hi}]")]
    DomainViolation {
        layer: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// An architecture-sizing precondition failed (width too small).
    #[error("width precondition failed at layer {layer}: N = {n_width} < required {required:.6}")]
    WidthPrecondition {
        layer: usize,
        n_width: usize,
        required: f64,
    },

    /// A data file was missing a required column.
    #[error("schema error: missing required column `{column}`")]
    MissingColumn { column: String },

    /// A degenerate data configuration (e.g. constant covariate) that the
    /// requested operation cannot handle.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Simulation envelope bands are only defined for 100 replicates.
    #[error("interval bands require exactly 100 replicates, got {got}")]
    UnsupportedReplicateCount { got: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidInput`] from any displayable value.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
