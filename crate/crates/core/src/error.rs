use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("step count must be at least 1 (got {0})")]
    ZeroSteps(u64),
    #[error("level must be at least 1 (got {0})")]
    ZeroLevel(u64),
    #[error("lambda must lie in (0, 1) (got {0})")]
    LambdaOutOfRange(f64),
    #[error("z must lie in [0, 1] (got {0})")]
    ZOutOfRange(f64),
    #[error("gamma must be positive and finite (got {0})")]
    GammaOutOfRange(f64),
    #[error("level must be at least {min} (got {a})")]
    LevelTooSmall { a: u64, min: u64 },
    #[error("moment order must be at least 1")]
    ZeroOrder,
    #[error("path enumeration is capped at n = {cap} (got {n})")]
    EnumerationCap { n: u64, cap: u64 },
    #[error("exact tables are capped at n = {cap} (got {n}); use the floating-point mode")]
    ExactCap { n: u64, cap: u64 },
    #[error("gamma = {gamma} is too large for level {a}: the matching step count {n} is below a")]
    StepsBelowLevel { a: u64, gamma: f64, n: u64 },
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error("Richardson extrapolation diverged (last correction {0:e})")]
    ExtrapolationDiverged(f64),
    #[error("adaptive quadrature did not converge (error estimate {0:e})")]
    QuadratureFailed(f64),
    #[error("table entry ({x}, {a}) lies outside the admissible wedge for n = {n}")]
    OutsideWedge { n: u64, x: u64, a: u64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}
