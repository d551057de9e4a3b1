use thiserror::Error;

/// Errors raised by matrix validation, state/measurement construction,
/// certification and the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: residual {residual:e} exceeds {tolerance:e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("density matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositive { eigenvalue: f64 },

    #[error("density matrix trace {trace} is not 1")]
    TraceNotOne { trace: f64 },

    #[error("zero vector does not define a state")]
    ZeroVector,

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),

    #[error("POVM has no elements")]
    EmptyPovm,

    #[error("POVM element {index} is not Hermitian (residual {residual:e})")]
    PovmNotHermitian { index: usize, residual: f64 },

    #[error("POVM element {index} is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    PovmNotPositive { index: usize, eigenvalue: f64 },

    #[error("POVM elements do not sum to the identity (max entry deviation {deviation:e})")]
    IncompleteSum { deviation: f64 },

    #[error("POVM has {outcomes} outcomes but the ensemble has {states} states")]
    CountMismatch { outcomes: usize, states: usize },

    #[error("index {index} out of range for {len} outcomes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("support of the average state does not contain state {index}")]
    SupportMismatch { index: usize },

    #[error("epsilon {0} is outside (0, 1]")]
    EpsilonOutOfRange(f64),

    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("brute-force search limited to dim <= 4 and n <= 4 with budget >= 1: {0}")]
    GuardRail(String),
}

impl Error {
    /// True for failures of floating-point machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NumericFailure(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
