use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("{0}")]
    Empty(&'static str),
    #[error("landmarks {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("field is not holomorphic: {0}")]
    NotHolomorphic(String),
    #[error("operation requires d = 1, got d = {0}")]
    RequiresLine(usize),
    #[error("source and target have different relative order")]
    OrderMismatch,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
