use alloc::string::String;
use core::fmt;

/// Errors surfaced by the model and the key-rate engines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A domain precondition was violated (negative intensity, probability
    /// outside [0, 1], bad decoy ordering, ...).
    Domain(String),
    /// An observable cell required by an estimator is missing.
    MissingCell(String),
    /// An estimator is undefined on the given data (e.g. zero single-photon
    /// yield under a phase-error bound).
    Undefined(String),
    /// Not enough events to report a statistically meaningful value.
    LowStatistics { needed: u64, got: u64 },
    /// A guard against runaway resource usage tripped.
    ResourceGuard(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::MissingCell(cell) => write!(f, "missing observable cell: {cell}"),
            Error::Undefined(msg) => write!(f, "undefined estimate: {msg}"),
            Error::LowStatistics { needed, got } => {
                write!(f, "insufficient statistics: needed {needed} events, got {got}")
            }
            Error::ResourceGuard(msg) => write!(f, "resource guard: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
