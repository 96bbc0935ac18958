use thiserror::Error;

/// Errors produced by vote encoding, randomizers, bounds and the harness.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A caller supplied an out-of-range or inconsistent parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The score vector cannot drive the requested mechanism (e.g. constant weights).
    #[error("degenerate voting rule: {0}")]
    DegenerateRule(String),

    /// An enumeration oracle was asked for a domain it refuses to materialize.
    #[error("domain too large for enumeration: {0}")]
    DomainTooLarge(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
