use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The error-propagation estimate has a vanishing slope at this phase.
    #[error("divergent sensitivity at theta = {theta}")]
    DivergentSensitivity { theta: f64 },

    #[error("numerical underflow: {0}")]
    Underflow(String),

    #[error("no finite minimum in window [{lo}, {hi}]")]
    NoMinimum { lo: f64, hi: f64 },

    #[error("size limit exceeded: {what} = {value} > {limit}")]
    Size {
        what: &'static str,
        value: usize,
        limit: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
