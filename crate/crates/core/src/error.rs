use thiserror::Error;

/// Errors produced by the regression toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain accepted by the operation.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Input data is malformed (non-finite, asymmetric, zero columns, ...).
    #[error("invalid data: {0}")]
    Data(String),
    /// The operation is only defined in a different size regime.
    #[error("unsupported regime: {0}")]
    Regime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
