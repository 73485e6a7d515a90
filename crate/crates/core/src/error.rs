use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site {k} is outside the reachable range [{lo}, {hi}]")]
    Domain { k: i64, lo: i64, hi: i64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("pencil {pencil} is numerically singular at site {k} (rcond {rcond:.3e})")]
    Stepping {
        k: i64,
        pencil: &'static str,
        rcond: f64,
    },

    #[error("boundary matrix is singular at site {ell} (rcond {rcond:.3e}): z is numerically an eigenvalue")]
    EigenvalueHit { ell: i64, rcond: f64 },

    #[error("linear fractional transform has a pole (rcond {rcond:.3e})")]
    TransformPole { rcond: f64 },

    #[error("singular matrix in {context} (rcond {rcond:.3e})")]
    Singular { context: String, rcond: f64 },

    #[error("{what} did not converge after {iterations} iterations (last change {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("kernel construction failed: {0}")]
    Kernel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
