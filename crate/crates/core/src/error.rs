use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid coefficient field: {0}")]
    InvalidCoefficient(String),

    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("parameter `{name}` = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Neumann data must have zero mean.
    #[error("incompatible datum: mean {mean:e} exceeds tolerance {tolerance:e}")]
    Incompatible { mean: f64, tolerance: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("quadrature not calibrated: relative residual {residual_min:e} at λ_min, {residual_max:e} at λ_max (worst {worst:e})")]
    Uncalibrated {
        residual_min: f64,
        residual_max: f64,
        worst: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("special function failure: {0}")]
    SpecialFunction(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("probe failure: {0}")]
    Probe(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_fraction(name: &'static str, s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: s,
            range: "(0, 1)",
        })
    }
}
