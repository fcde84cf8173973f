use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("comparison could not be decided at {bits} bits of precision ({context})")]
    PrecisionLimited { bits: u32, context: String },

    #[error("no solution found up to Q = {q_max} (precision was insufficient to decide a borderline candidate)")]
    NoSolutionFound { q_max: u64 },

    #[error("the approximation error reached exactly zero at q = {q}; the exponent is infinite")]
    TerminatedRational { q: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("enumeration up to {needed} exceeds the configured budget of {budget}")]
    ScaleOverflow { needed: f64, budget: u64 },

    #[error("rank deficiency: {0}")]
    RankDeficiency(String),

    #[error("Plücker vector does not decompose: {0}")]
    DecompositionFailure(String),

    #[error("argument outside the admissible domain: {0}")]
    Domain(String),

    #[error("integrality violation (implementation bug): {0}")]
    IntegralityViolation(String),

    #[error("insufficient gap data: {0}")]
    InsufficientGapData(String),

    #[error("curve is not contained in the subspace: {0}")]
    ContainmentViolation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn precision(bits: u32, context: impl Into<String>) -> Self {
        Error::PrecisionLimited {
            bits,
            context: context.into(),
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PrecisionLimited { .. } | Error::NoSolutionFound { .. } => 2,
            Error::ScaleOverflow { .. } => 3,
            Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidWeight(_)
            | Error::Domain(_)
            | Error::ContainmentViolation(_)
            | Error::Io(_) => 4,
            _ => 1,
        }
    }
}
