use thiserror::Error;

/// Crate-wide error type. Variants are grouped into two families that the
/// CLI maps onto exit codes: specification errors (exit 2) and numerical
/// failures (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate index {index} out of bounds for dimension {d}")]
    IndexOutOfBounds { index: usize, d: usize },

    #[error("degree overflow: product of degree {degree} exceeds bound {bound}")]
    DegreeOverflow { degree: usize, bound: usize },

    #[error("invalid process specification: {0}")]
    SpecInvalid(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown builtin process `{0}`")]
    UnknownBuiltin(String),

    #[error("bad parameter for builtin `{name}`: {msg}")]
    BadParam { name: String, msg: String },

    #[error("jump moments declared but no jump sampler configured")]
    NoSampler,

    #[error("non-finite matrix entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("quadrature failed to converge after {refinements} refinements (last diff {last_diff:e})")]
    QuadratureNonConvergence { refinements: usize, last_diff: f64 },

    #[error("diffusion matrix not positive semi-definite at t={t}, pivot {pivot:e}")]
    DiffusionNotPsd { t: f64, pivot: f64 },

    #[error("{0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by an invalid or inexpressible specification.
    pub fn is_spec_error(&self) -> bool {
        matches!(
            self,
            Error::SpecInvalid(_)
                | Error::Parse { .. }
                | Error::UnknownBuiltin(_)
                | Error::BadParam { .. }
                | Error::NoSampler
                | Error::DimensionMismatch { .. }
                | Error::IndexOutOfBounds { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
