use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violated a mathematical precondition (empty set, bad range, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A precondition on the caller's data did not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unbound template placeholder `{{{0}}}`")]
    UnboundPlaceholder(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("vectorizer fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::Error::Domain(alloc::format!($($arg)*))
    };
}
pub(crate) use domain;
