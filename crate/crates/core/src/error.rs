use thiserror::Error;

/// Errors raised by model construction, scale-function evaluation,
/// the Gerber-Shiu formulas and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A documented precondition does not hold. `precondition` names it.
    #[error("domain error: {precondition} violated ({detail})")]
    Domain {
        precondition: &'static str,
        detail: String,
    },

    /// One or more model invariants failed; each entry names the field.
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("quadrature tolerance not met: achieved error estimate {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("scale function method unsupported: {0}")]
    Unsupported(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// Two representations of the same quantity disagreed beyond tolerance.
    #[error("{what}: representations differ by {difference:e}")]
    Mismatch { what: &'static str, difference: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(precondition: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            precondition,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
