//! Error type shared across the crate.

use std::fmt;

/// Everything that can go wrong, from bad dyads to non-identifiable targets.
#[derive(Debug)]
pub enum Error {
    /// Self-loop or out-of-range node index.
    InvalidDyad { i: usize, j: usize, n: usize },
    /// Operation requires at least two nodes.
    DegenerateNetwork { n: usize },
    /// Model refers to attributes, levels, or lengths that do not line up.
    ModelMismatch(String),
    /// Offset parameters outside their valid range (e.g. mu/(n-1) >= 1).
    InvalidOffset(String),
    /// Exhaustive enumeration would exceed the configured dyad cap.
    EnumerationTooLarge { dyads: usize, cap: usize },
    /// Statistic cannot be derived from egocentric data.
    NotEgocentric(String),
    /// Target statistics sit on the boundary of the achievable region.
    DegenerateTargets(String),
    /// A covariate perfectly separates ties from non-ties.
    Separation(String),
    /// Method preconditions violated (e.g. Markov term in the logistic path).
    WrongMethod(String),
    /// Synthetic-population targets cannot be realized.
    Infeasible(String),
    /// Malformed input file.
    Parse(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDyad { i, j, n } => {
                write!(f, "invalid dyad ({i},{j}) for a network of {n} nodes")
            }
            Error::DegenerateNetwork { n } => {
                write!(f, "network of {n} nodes is too small for this operation")
            }
            Error::ModelMismatch(msg) => write!(f, "model/attribute mismatch: {msg}"),
            Error::InvalidOffset(msg) => write!(f, "invalid offset: {msg}"),
            Error::EnumerationTooLarge { dyads, cap } => {
                write!(f, "cannot enumerate {dyads} dyads (cap {cap})")
            }
            Error::NotEgocentric(msg) => {
                write!(f, "statistic is not egocentrically identifiable: {msg}")
            }
            Error::DegenerateTargets(msg) => write!(f, "degenerate targets: {msg}"),
            Error::Separation(msg) => write!(f, "separation: {msg}"),
            Error::WrongMethod(msg) => write!(f, "wrong method: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible targets: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
