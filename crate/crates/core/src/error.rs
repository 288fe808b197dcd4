use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("Fock level ({n1}, {n2}) outside basis with n_max = {n_max}")]
    LevelOutOfRange { n1: usize, n2: usize, n_max: usize },

    #[error("cutoff mismatch: expected n_max = {expected}, got n_max = {found}")]
    CutoffMismatch { expected: usize, found: usize },

    #[error("expected {expected} elements, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("state is not normalized: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian: defect {defect:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("odd cat state with zero amplitude is the null vector")]
    NullCatState,

    #[error("conditioning weight {0:e} is below the null-slice floor")]
    NullConditioning(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cutoff n_max = {n_max} too large for the dense oracle (limit {limit})")]
    OracleTooLarge { n_max: usize, limit: usize },

    #[error("evolution aborted at tau = {tau}: {reason}")]
    EvolutionAborted { tau: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
