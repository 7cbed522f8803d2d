use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Riccati iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("innovation covariance C P C^T + R is numerically singular")]
    SingularInnovation,
    #[error("coefficient matrix is not Schur stable (spectral radius {0})")]
    UnstableCoefficient(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("sampling interval must be positive, got {0}")]
    InvalidTau(f64),
    #[error("ensemble graph is disconnected")]
    Disconnected,
    #[error("TooManyReceivers: {g} GNSS receivers for {n} ensemble clocks (need g < n)")]
    TooManyReceivers { g: usize, n: usize },
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no stabilizing synchronization gain found (best radius {0})")]
    NoStabilizingGainFound(f64),
    #[error("no feasible tracking gain found")]
    NoFeasiblePoint,
    #[error("infeasible tracking gain: {0}")]
    Infeasible(String),
    #[error("AVAR weights must sum to one (sum = {0})")]
    WeightsNotNormalized(f64),
    #[error("series of length {len} too short for window {w}")]
    SeriesTooShort { len: usize, w: usize },
    #[error("tau {tau} is not an integer multiple of the sample interval {sample}")]
    NonIntegerWindow { tau: f64, sample: f64 },
    #[error("gain set does not match the mode: {0}")]
    GainModeMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
