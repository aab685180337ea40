use thiserror::Error;

/// Errors raised across the library. Each variant maps onto a CLI exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("mode {mode} out of range for {num_modes} mode(s)")]
    ModeOutOfRange { mode: usize, num_modes: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("truncation tail {tail:.3e} on mode {mode} exceeds tolerance {tolerance:.3e}")]
    TailViolation { mode: usize, tail: f64, tolerance: f64 },
    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("Gram matrix ill-conditioned (condition {0:.3e}); merge near-coincident terms")]
    IllConditionedGram(f64),
    #[error("undefined quantity: {0}")]
    Undefined(String),
    #[error("trace drift {0:.3e} beyond tolerance")]
    TraceDrift(f64),
    #[error("detection outcome has zero probability")]
    ZeroProbability,
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    /// Process exit code: 2 configuration, 3 numerical tolerance, 4 infeasible cutoff.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::TailViolation { .. } | LabError::InvalidCutoff(_) => 4,
            LabError::NotPositive(_)
            | LabError::NotHermitian(_)
            | LabError::IllConditionedGram(_)
            | LabError::Undefined(_)
            | LabError::TraceDrift(_)
            | LabError::ZeroProbability
            | LabError::Tolerance(_) => 3,
            _ => 2,
        }
    }
}
