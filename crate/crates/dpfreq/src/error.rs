//! Library-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs are structurally inconsistent with each other (mismatched
    /// fields, lengths, or party counts).
    #[error("contract violation: {0}")]
    Contract(String),
    /// No parameter value can satisfy the requested privacy constraint.
    #[error("infeasible calibration: {0}")]
    Infeasible(String),
    /// A share set with fewer shares than the sharing requires.
    #[error("incomplete bundle: {0}")]
    IncompleteBundle(String),
    /// The requested coalition lies outside the protocol's threat model.
    #[error("unsupported coalition: {0}")]
    UnsupportedCoalition(String),
    /// Iterative optimization hit the iteration cap; the best iterate found
    /// so far is attached.
    #[error("optimizer did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize, best: Vec<f64> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
