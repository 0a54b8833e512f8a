use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis of {sites} sites and {particles} particles has {size} states, above the cap of {cap}")]
    Capacity {
        sites: usize,
        particles: usize,
        size: u128,
        cap: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tensor is not symmetric: deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    SymmetryViolation { deviation: f64, tolerance: f64 },

    #[error("matrix is not Hermitian: max |H - H^dagger| = {deviation:.3e}")]
    NonHermitian { deviation: f64 },

    #[error("decomposition did not converge: {0}")]
    NonConvergence(String),

    #[error("norm drifted by {drift:.3e} at t = {time}")]
    NormDrift { drift: f64, time: f64 },

    #[error("vanishing input: {0}")]
    ZeroInput(&'static str),

    #[error("ambiguous localized/extended assignment: IPRs {0:.6} and {1:.6}")]
    AmbiguousAssignment(f64, f64),

    #[error("level sequence is not strictly increasing at index {index}")]
    UnsortedLevels { index: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical-contract violations, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonHermitian { .. } | Error::NonConvergence(_) | Error::NormDrift { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
