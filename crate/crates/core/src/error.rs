use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The argument is valid but outside the region where the result is certified.
    #[error("range error: {0}")]
    Range(String),

    /// Array lengths or grids do not match.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Conductivity model violates its declared hypotheses.
    #[error("model error: {0}")]
    Model(String),

    /// Picard iteration failed to converge.
    #[error("solver did not converge at step {step} after {iterations} iterations (residual history {residuals:?})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residuals: Vec<f64>,
    },

    /// Linear solve or bordered system failure.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// Forward-backward sweep oscillation.
    #[error("sweep diverged: {0}")]
    Divergence(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Range(_) => "range",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::Model(_) => "model",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Numerics(_) => "numerics",
            Error::Divergence(_) => "divergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
