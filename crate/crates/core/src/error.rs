use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("exponent out of range at {point:?}: p = {value} (need 1 < p < inf)")]
    ExponentBounds { point: Vec<f64>, value: f64 },

    #[error("expression is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid object belongs to a different domain")]
    DomainMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("perturbation is not increasing: B({point:?}, {lo}) = {b_lo} > B({point:?}, {hi}) = {b_hi}")]
    NotMonotone {
        point: Vec<f64>,
        lo: f64,
        hi: f64,
        b_lo: f64,
        b_hi: f64,
    },

    #[error("perturbation violates the growth bound at {point:?}, z = {zeta}: |B| = {value} > {bound}")]
    GrowthViolation {
        point: Vec<f64>,
        zeta: f64,
        value: f64,
        bound: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
