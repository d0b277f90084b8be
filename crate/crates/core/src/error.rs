use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("slot {slot} out of range for arity {arity}")]
    Slot { slot: usize, arity: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown operad `{0}`")]
    UnknownOperad(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown term key `{0}`")]
    UnknownKey(String),
    #[error("relations are not S3-stable: {0}")]
    NotStable(String),
    #[error("{what} arity {n} exceeds guard {max} (raise with --max-plain-arity/--max-wheeled-arity or OPERAD_FORGE_MAX_ARITY)")]
    Guard { what: &'static str, n: usize, max: usize },
    #[error("d^2 != 0 between degrees {0} and {1}")]
    NotComplex(i64, i64),
    #[error("invalid filtration: d entry ({row}, {col}) in degree {degree} raises level {from} -> {to}")]
    Filtration { degree: i64, row: usize, col: usize, from: usize, to: usize },
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
