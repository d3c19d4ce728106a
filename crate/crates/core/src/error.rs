use thiserror::Error;

/// Errors produced by the simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("total degree {ell} is odd; half-edges cannot be perfectly matched")]
    Parity { ell: u64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("criticality target {target:.6} unreachable; best achievable gap {gap:.3e}")]
    Unreachable { target: f64, gap: f64 },

    #[error("no simple realization found after {attempts} attempts")]
    RejectionFailure { attempts: usize },

    #[error("truncation infeasible: {0}")]
    TruncationInfeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("threshold not reached: partial sum {partial} after {terms} terms")]
    RangeExhausted { partial: f64, terms: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("trial (n={n}, trial={trial}): {source}")]
    Trial {
        n: usize,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
