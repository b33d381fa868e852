use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("p-value must lie in [0, 1], got {0}")]
    InvalidPValue(f64),

    #[error("null and alternative densities both vanish at x = {x}")]
    DegenerateDensity { x: f64 },

    #[error("estimation window is empty")]
    EmptyWindow,

    #[error("window index {index} is not after the previous index {last}")]
    NonIncreasingIndex { index: i64, last: i64 },

    #[error("window contains index {index} which is not before evaluation time {t}")]
    FutureIndex { index: i64, t: i64 },

    #[error("time kernel weights sum to zero at t = {t}")]
    ZeroTimeWeight { t: i64 },

    #[error("estimator not ready: {have} of {need} burn-in observations")]
    NotReady { have: usize, need: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("oracle threshold undefined: alpha {alpha} is not below the maximal mFDR {max_mfdr}")]
    OracleThresholdUndefined { alpha: f64, max_mfdr: f64 },

    #[error("block segments overlap: ({a_start}, {a_end}] and ({b_start}, {b_end}]")]
    OverlappingSegments {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
}
