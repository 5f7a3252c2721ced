use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix A({n}) is singular")]
    Singular { n: i64 },

    #[error("matrix A({n}) is numerically singular (inverse residual {residual:e})")]
    NumericallySingular { n: i64, residual: f64 },

    #[error("index {n} lies outside the tabulated window [{lo}, {hi}]")]
    OutOfWindow { n: i64, lo: i64, hi: i64 },

    #[error("requested span of {len} steps exceeds the window cap of {cap}")]
    WindowCap { len: u64, cap: u64 },

    #[error("the zero vector has no Bohl exponents")]
    ZeroVector,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid sequence description: {0}")]
    InvalidSequence(String),

    #[error("scalar sequence {coordinate} vanishes at n = {n}")]
    ZeroScalar { coordinate: usize, n: i64 },

    #[error("decay fit failed: fitted log-rate {slope} is not negative")]
    FitFailed { slope: f64 },

    #[error("projector drift {drift:e} at n = {n} exceeds the repair threshold")]
    ProjectorDrift { n: i64, drift: f64 },

    #[error("fiber dimensions sum to {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("certificate ranks are not monotone across gaps at gamma = {gammas:?}")]
    NonMonotoneRanks { gammas: Vec<f64> },

    #[error("{0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
