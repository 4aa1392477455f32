use thiserror::Error;

use crate::fock::Mode;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("photon number {n} exceeds cutoff {cutoff}")]
    Cutoff { n: usize, cutoff: usize },

    #[error(
        "truncation lost {lost:.3e} of the norm (tolerance {tolerance:.1e}); \
         raise the cutoff of {mode} to at least {suggested}"
    )]
    TruncationLoss {
        mode: Mode,
        lost: f64,
        tolerance: f64,
        suggested: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{0} is not part of the state")]
    UnknownMode(Mode),

    #[error("{0} already exists in the state")]
    DuplicateMode(Mode),

    #[error("partial trace needs at least one mode to keep")]
    EmptyKeep,

    #[error("window quadrature did not converge: successive orders differ by {difference:.3e} at order {order}")]
    QuadratureNonConvergence { order: usize, difference: f64 },

    #[error("x3 grid too narrow: boundary density is {ratio:.3e} of the peak")]
    GridTooNarrow { ratio: f64 },

    #[error("state has zero norm; the heralding event has zero probability")]
    ZeroProbability,

    #[error("degenerate resource: the only vacuum-removing displacement is zero; use the feed-forward variant")]
    DegenerateResource,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl SimError {
    /// Failures caused by numerics (cutoffs, quadrature, grids) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimError::TruncationLoss { .. }
                | SimError::QuadratureNonConvergence { .. }
                | SimError::GridTooNarrow { .. }
                | SimError::ZeroProbability
        )
    }
}
