use alloc::string::String;

use thiserror::Error;

use crate::algebra::Monomial;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("mode index {index} out of range (model declares {declared} modes)")]
    ModeOutOfRange { index: usize, declared: usize },
    #[error("spin index {index} out of range (model declares {declared} spins)")]
    SpinOutOfRange { index: usize, declared: usize },
    #[error("hamiltonian is not Hermitian (coefficient defect {defect:e})")]
    NonHermitianHamiltonian { defect: f64 },
    #[error("duplicate key in equation-of-motion request")]
    DuplicateKey,
    #[error("invalid monomial {0}")]
    InvalidMonomial(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("moment exponent {order} exceeds the configured maximum {max}")]
    OrderTooHigh { order: u32, max: u32 },
    #[error("invalid state parameter: {0}")]
    InvalidParameter(String),
    #[error("mode {mode} holds more than one cat component")]
    MultipleCats { mode: usize },
    #[error("correlation key {key} must touch at least two modes")]
    CorrelationNotCrossMode { key: Monomial },
    #[error("correlation key {key} has order {order}, above the supported maximum {max}")]
    CorrelationOrder { key: Monomial, order: u32, max: u32 },
    #[error("key {key} outside the ansatz index space")]
    KeyOutOfRange { key: Monomial },
    #[error("mode ansatz must hold at least one component")]
    EmptyMode,
    #[error("bloch vector length {0} exceeds 1")]
    BlochOutsideBall(f64),
    #[error("second moments are unphysical (minimal quadrature variance {0:e} <= 0)")]
    Unphysical(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("hilbert dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("fock cutoff must be at least 1 (mode {mode})")]
    ZeroCutoff { mode: usize },
    #[error("truncation declares {declared} modes but the model has {model}")]
    ModeCountMismatch { declared: usize, model: usize },
    #[error("steady state is not unique: bordered system singular at column {column} (pivot {magnitude:e})")]
    Degenerate { column: usize, magnitude: f64 },
    #[error("boundary population {population:e} on mode {mode} exceeds {limit:e}; raise the cutoff")]
    CutoffTooSmall { mode: usize, population: f64, limit: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("closure failure: monomial {key} is not evaluable by the ansatz")]
    Closure { key: Monomial },
    #[error("template has no free parameters")]
    NoFreeParameters,
    #[error("parameter vector has length {got}, schema expects {expected}")]
    ParameterLength { got: usize, expected: usize },
    #[error("invalid parameter slot: {0}")]
    InvalidSlot(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseSpaceError {
    #[error("moment <ad^{k} a^{l}> missing from the supplied set")]
    MissingMoment { k: u32, l: u32 },
    #[error("characteristic series diverges inside the z-window (|chi| = {value:e} at |z| = {radius}); increase sigma_reg or shrink the window")]
    Divergent { value: f64, radius: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("polariton transform needs three modes and no spins (got {modes} modes, {spins} spins)")]
    NotThreeBoson { modes: usize, spins: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}
