//! Error type shared across the crate.

use std::fmt;

/// Errors produced by model validation, construction and the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration document is malformed or fails validation.
    /// Carries a field path (e.g. `arrival.d0[1]`) and a message.
    Config { field: String, message: String },
    /// A model object violates its invariants (stochasticity, reducibility,
    /// singular `I - T`, ...).
    Validation(String),
    /// An operation was called with an out-of-range argument.
    Argument(String),
    /// A solver failed to converge or hit a singular system.
    Solver(String),
    /// Two routes that must agree disagreed; points at a construction bug.
    Consistency(String),
    /// The model admits no tasks at all, so tagged-task quantities are undefined.
    Degenerate(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config { field, message } => write!(f, "config error at `{field}`: {message}"),
            Error::Validation(m) => write!(f, "validation error: {m}"),
            Error::Argument(m) => write!(f, "argument error: {m}"),
            Error::Solver(m) => write!(f, "solver error: {m}"),
            Error::Consistency(m) => write!(f, "consistency error: {m}"),
            Error::Degenerate(m) => write!(f, "degenerate model: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
