use thiserror::Error;

use crate::fit::FitError;
use crate::params::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Input outside the domain of a formula (e.g. `r_c >= 1`).
    #[error("domain error: {0}")]
    Domain(String),
    /// A formula diverges for the given input.
    #[error("singularity: {0}")]
    Singular(String),
    #[error("fit error: {0}")]
    Fit(#[from] FitError),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no feasible point: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for input/validation problems, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Io(_)
        )
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
