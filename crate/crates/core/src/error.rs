use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("payoff matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("payoff matrix must have at least 2 pure strategies, got {0}")]
    TooSmall(usize),
    #[error("non-finite payoff entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not a mixed strategy: {0}")]
    NotOnSimplex(String),
    #[error("strategy is not interior: entry {index} is {value}")]
    NotInterior { index: usize, value: f64 },
    #[error("learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("invalid learning-rate schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule exhausted at step {0}")]
    ScheduleExhausted(usize),
    #[error("relative entropy undefined: Q({index}) = 0 while P({index}) > 0")]
    SupportViolation { index: usize },
    #[error("game must be normalized to [0, 1] for this operation")]
    NotNormalized,
    #[error("trajectory did not start at the uniform strategy")]
    NonUniformStart,
    #[error("unknown game kind `{0}`")]
    UnknownKind(String),
    #[error("empty support set")]
    EmptySupport,
    #[error("support index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("game too large for support enumeration: n = {n} > {max}")]
    TooLargeForEnumeration { n: usize, max: usize },
    #[error("certificate does not belong to this game: {0}")]
    ForeignCertificate(String),
    #[error("linear program: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("trajectory requires at least one step")]
    NoSteps,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
