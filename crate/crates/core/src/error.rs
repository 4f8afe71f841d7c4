use thiserror::Error;

use crate::sim::NodeId;

/// Errors raised by the simulator and its estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {value} for `{name}` is outside [0, 1]")]
    OutOfUnitRange { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bearing is undefined for coincident points")]
    CoincidentPoints,

    #[error("need at least {need} samples, have {have}")]
    InsufficientSamples { need: usize, have: usize },

    #[error("need at least {need} reference fixes, have {have}")]
    InsufficientFixes { need: usize, have: usize },

    #[error("reference geometry is degenerate ({0})")]
    DegenerateGeometry(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e} m)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("target {target} is {distance:.1} m away, beyond the {range:.1} m transmission range")]
    OutOfRange {
        target: NodeId,
        distance: f64,
        range: f64,
    },

    #[error("node {0} is unknown")]
    UnknownNode(NodeId),

    #[error("node {0} does not hold the role required for this operation")]
    WrongRole(NodeId),

    #[error("no verifiable introducer reply")]
    NoValidReplies,

    #[error("no votes were collected")]
    NoVotes,

    #[error("no eligible candidates: {0}")]
    NoCandidates(String),

    #[error("no previous heading to coast on")]
    NoHeading,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that `value` lies in the closed unit interval.
pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfUnitRange { name, value })
    }
}
