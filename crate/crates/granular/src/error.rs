use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("degenerate pair: zero relative velocity")]
    DegeneratePair,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors caused by bad inputs rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Invariant(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
