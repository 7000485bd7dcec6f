use thiserror::Error;

/// Errors produced by the entropy, walk and trajectory routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An input violated a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A numerical procedure failed to reach its tolerance.
    #[error("numerical failure: {what} (residual {residual:.3e})")]
    Numeric { what: String, residual: f64 },

    /// A vector is not an eigenvector of the operator it was checked against.
    #[error("not an eigenvector: residual {residual:.3e}")]
    NotEigenvector { residual: f64 },

    /// An enumeration would exceed its configured budget.
    #[error("resource budget exceeded: {what} needs {required}, limit is {limit}")]
    Budget {
        what: String,
        required: u128,
        limit: u128,
    },

    /// Probability mass dropped by pruning exceeds the accuracy bound.
    #[error("pruned probability mass {pruned:.3e} exceeds bound {bound:.1e}")]
    Accuracy { pruned: f64, bound: f64 },

    /// The requested computation is not defined for this configuration.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
