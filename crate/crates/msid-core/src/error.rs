//! Error type shared by all estimation and simulation routines.

use thiserror::Error;

/// Errors produced by design validation, simulation, estimation, and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("experiment index {index} out of range for {m} experiments")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("excitation rank condition failed: {0}")]
    RankCondition(String),

    #[error("excitation lines overlap after sampling: {0}")]
    LineOverlap(String),

    #[error("record does not span an integer number of periods: {0}")]
    SpectralLeakage(String),

    #[error("sample count {n} is too small for {lines} excitation lines")]
    TooFewSamples { n: usize, lines: usize },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("frequency response undefined at omega = {omega}: {reason}")]
    FrfUndefined { omega: f64, reason: String },

    #[error("stacked output has imaginary residue {residue:.3e}, above threshold {threshold:.3e}")]
    ImaginaryResidue { residue: f64, threshold: f64 },

    #[error("structure is overconstrained ({0}); use the iterative fit")]
    Overconstrained(String),

    #[error("interpolation matrix is row-rank deficient: rank {rank} of {rows} rows")]
    RowRankDeficient { rank: usize, rows: usize },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
