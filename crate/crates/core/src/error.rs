use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtdError {
    /// A caller broke an operation's precondition (shape, range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not symmetric: max |A - A^T| = {asymmetry:e} exceeds {allowed:e}")]
    NotSymmetric { asymmetry: f64, allowed: f64 },

    /// Gram-Schmidt met a (numerically) dependent vector.
    #[error("degenerate vector set: vector {index} has residual norm {norm:e}")]
    Degenerate { index: usize, norm: f64 },

    #[error("numerical blow-up at t = {time}: {what}")]
    BlowUp { time: f64, what: String },

    #[error("step size underflow at t = {time}: dt = {dt:e} < dt_min = {dt_min:e}")]
    StepUnderflow { time: f64, dt: f64, dt_min: f64 },

    #[error("orthonormality lost at t = {time}: Gram error {error:e}")]
    Orthonormality { time: f64, error: f64 },

    #[error("growth bound violated in window starting at t = {t0}: {detail}")]
    GrowthBound { t0: f64, detail: String },

    /// The DMD snapshot matrix has too small a numerical rank.
    #[error("rank collapse: retained rank {rank}, need {needed}")]
    RankCollapse { rank: usize, needed: usize },

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T, E = OtdError> = std::result::Result<T, E>;
