use thiserror::Error;

/// Errors raised by the survival engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid time partition: {0}")]
    InvalidPartition(String),

    #[error("time {t} lies outside the partition (0, {end}]")]
    OutsidePartition { t: f64, end: f64 },

    #[error("degenerate interval-censored observation on ({lower}, {upper}]: survival equal at both bounds")]
    DegenerateInterval { lower: f64, upper: f64 },

    #[error("negative cumulative hazard {0}")]
    NegativeCumulativeHazard(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid event record: {0}")]
    InvalidEvent(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("quadrature failed: {reason} (partial estimate {partial})")]
    Quadrature { reason: String, partial: f64 },

    #[error("invalid chain configuration: {0}")]
    ChainConfig(String),

    #[error("could not find a finite starting point after {0} attempts")]
    Initialization(usize),

    #[error("zero within-chain variance for {0}")]
    ZeroVariance(String),

    #[error("empty samples")]
    EmptySamples,

    #[error("probabilities violate row sum: {0}")]
    RowSum(String),

    #[error("request incompatible with family: {0}")]
    FamilyMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
