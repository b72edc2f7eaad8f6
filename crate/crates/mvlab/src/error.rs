//! Error type shared by every module of the crate.

use thiserror::Error;

/// Unified error enum. Variants split into three families that callers
/// (in particular the CLI's exit-code contract) treat differently:
/// usage errors (bad parameters, mismatched grids), numerical errors
/// (blowup, domain escape, diagnostics that cannot be computed), and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Spatial dimension of an argument does not match the object it is used with.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two gridded objects were combined but live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A particle left the computational box during a mean-field drift
    /// evaluation or a binning pass.
    #[error("particle {particle} left the box at t = {time}: |{position}| exceeds the half-width")]
    DomainEscape {
        particle: usize,
        time: f64,
        position: f64,
    },

    /// A coordinate became non-finite during time stepping.
    #[error("simulation blowup: non-finite coordinate for particle {particle} at t = {time}")]
    Blowup { particle: usize, time: f64 },

    /// More than the tolerated fraction of points fell outside the box.
    #[error(
        "{escaped} of {total} points ({fraction:.4}%) fell outside the box; \
         the tolerated fraction is 0.1% — enlarge the box"
    )]
    EscapeThreshold {
        escaped: usize,
        total: usize,
        /// Escaped fraction in percent.
        fraction: f64,
    },

    /// A dyadic frequency level does not fit under the grid's Nyquist limit.
    #[error("level {requested} violates the Nyquist constraint of this grid; the maximum level is {max_level}")]
    Nyquist { requested: u32, max_level: u32 },

    /// A fit was requested with too few usable data points.
    #[error("only {available} blocks above the numerical floor, {needed} needed for a fit")]
    InsufficientBlocks { available: usize, needed: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate a misuse of the API rather than a
    /// numerical event encountered during a well-posed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::GridMismatch(_)
                | Error::Nyquist { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for constructing an `InvalidParameter` error.
pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
