use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("set system violates nesting: {0}")]
    Nesting(String),

    #[error("point {z} lies outside the domain")]
    OutsideDomain { z: Complex64 },

    #[error("disk D({center}, {radius}) is not contained in the domain")]
    NotContained { center: Complex64, radius: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("charge `{label}` is not a probability measure (mass {mass})")]
    NotProbability { label: String, mass: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("integral is indeterminate (+∞ and −∞ contributions)")]
    Indeterminate,

    #[error("test function `{id}` is invalid for the set system: {reason}")]
    InvalidTestFunction { id: String, reason: String },

    #[error("empty test family")]
    EmptyFamily,

    #[error("precondition u ≤ M violated at {witness} (u − M = {excess})")]
    NotDominated { witness: Complex64, excess: f64 },

    #[error("radius auto-shrink did not reach modulus {target} after {iterations} halvings")]
    ShrinkFailed { target: f64, iterations: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
