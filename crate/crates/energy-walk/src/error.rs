//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by constructors and numerical operations.
///
/// Validation is strict: invariant violations are reported, never repaired.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("energy gap must be positive, got {0}")]
    NonPositiveGap(f64),

    #[error("ladder needs at least {min} levels, got {got}")]
    TooFewLevels { min: usize, got: usize },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("gaussian width must be positive, got {0}")]
    DegenerateWidth(f64),

    #[error("invalid transition rates: {0}")]
    InvalidRates(String),

    #[error("invalid population vector: {0}")]
    InvalidPopulation(String),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("diagonal entry {index} is negative: {value}")]
    NegativePopulation { index: usize, value: f64 },

    #[error("rates defined for {rates} levels but state has {state}")]
    RateShapeMismatch { rates: usize, state: usize },

    #[error("level-dependent rates are not supported here; constant rates required")]
    LevelDependentUnsupported,

    #[error("stationary weights are not normalizable: p_plus = {p_plus} >= p_minus = {p_minus}")]
    NotNormalizable { p_plus: f64, p_minus: f64 },

    #[error("iteration did not converge within {max_iters} iterations (residual {residual})")]
    NoConvergence { max_iters: usize, residual: f64 },

    #[error("fixed point is not unique (spectral gap {gap} below threshold)")]
    NonUniqueFixedPoint { gap: f64 },

    #[error("effective temperature undefined: p_plus = {p_plus} >= p_minus = {p_minus}")]
    UnbiasedRates { p_plus: f64, p_minus: f64 },

    #[error("effective temperature undefined for p_plus = 0")]
    ZeroUpRate,

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("coherence parameter must lie in [0, 1], got {0}")]
    MuOutOfRange(f64),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("superoperator has no eigenvalue within {tol} of 1 (closest |lambda - 1| = {closest})")]
    NoUnitEigenvalue { tol: f64, closest: f64 },

    #[error("no feasible rate scale: lazy profile leaves no room at level {level}")]
    InfeasibleRates { level: usize },

    #[error("decay fit needs at least {min} usable samples, found {found}")]
    InsufficientTail { min: usize, found: usize },

    #[error("linear algebra backend failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
