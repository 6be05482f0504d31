use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("trajectory needs at least {min} samples, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("basis index {index} out of range (dimension {dim})")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("known weight value must be non-zero")]
    ZeroKnownValue,
    #[error("invalid delay {delay} s for sample period {dt} s: {reason}")]
    InvalidDelay { delay: f64, dt: f64, reason: &'static str },
    #[error("gram matrix is not symmetric (max asymmetry {asymmetry:e})")]
    AsymmetricGram { asymmetry: f64 },
    #[error("gram matrix is indefinite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    IndefiniteGram { min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("problem too large: {vars} decision variables exceeds limit {limit}")]
    TooLarge { vars: usize, limit: usize },
    #[error("singular KKT system (pivot ratio estimate {condition:e})")]
    SingularKkt { condition: f64 },
    #[error("no weights given for follower {0}")]
    MissingWeights(String),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("missing track for agent {agent} in flight {flight}")]
    MissingTrack { flight: String, agent: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("follower {follower}: {source}")]
    Follower { follower: String, source: Box<Error> },
    #[error("flight #{index}: {source}")]
    Flight { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn for_follower(self, follower: &str) -> Self {
        Error::Follower { follower: follower.into(), source: Box::new(self) }
    }

    pub(crate) fn for_flight(self, index: usize) -> Self {
        Error::Flight { index, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
