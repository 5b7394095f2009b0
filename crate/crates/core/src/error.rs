use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("requested {what} beyond the simulated horizon")]
    Range { what: String },

    /// Numerical routine failed to meet its tolerance; carries the best estimate.
    #[error("{context}: no convergence (estimate {estimate:e}, error bound {error_bound:e})")]
    Numeric {
        context: String,
        estimate: f64,
        error_bound: f64,
    },
}
