use thiserror::Error;

/// Errors raised by the operator algebra, spectral and dynamics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site {site} out of range for a chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dimension mismatch: {left} sites vs {right} sites")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{n_sites} sites exceeds the dense materialization cap of {cap}")]
    SizeCap { n_sites: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("edge operator requires 0 < g/J < 1 (ordered phase); got g/J = {ratio}")]
    OutsideOrderedPhase { ratio: f64 },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error(
        "operator does not commute with parity; use `diagonalize` instead of `sector_diagonalize`"
    )]
    ParityNotConserved,

    #[error("gauge undefined for pair {pair}: reference matrix element |m| = {element:.3e}")]
    GaugeUndefined { pair: usize, element: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error(
        "structured ensembles need degenerate pairs, which are absent in the disordered phase"
    )]
    DisorderedPhase,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("time grid step {step} too coarse, need at most {required}")]
    InsufficientResolution { step: f64, required: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
