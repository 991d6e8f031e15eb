use thiserror::Error;

/// Errors raised by the core library.
///
/// Variants are grouped by failure category so front ends can map them onto
/// distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A coefficient tree (or pair of trees) does not have the expected shape.
    #[error("structural error: {0}")]
    Structure(String),

    /// A level or index lies outside the admissible range.
    #[error("range error: {0}")]
    Range(String),

    /// A real-valued parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters are individually valid but inconsistent with each other.
    #[error("configuration error: {0}")]
    Config(String),

    /// The observation does not cover the levels the test needs.
    #[error("coverage error: observation stops at level {available}, test needs levels up to {required}")]
    Coverage { required: u32, available: u32 },

    /// No signal with the requested separation exists.
    #[error("infeasible separation: rho = {rho} exceeds the largest single-level gap {cap}{hint}")]
    Infeasible { rho: f64, cap: f64, hint: String },

    /// An exact computation was requested beyond its enumeration budget.
    #[error("cost error: {0}")]
    Cost(String),

    /// Sampled data do not follow the required design.
    #[error("design error: {0}")]
    Design(String),

    /// Requested resolution exceeds what the sample supports.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Bisection for a detection boundary failed; carries the probe trace.
    #[error("bisection did not converge: {reason}\n{trace}")]
    Bisection { reason: String, trace: String },

    /// Malformed input data (CSV, JSON).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn structure(msg: impl Into<String>) -> Error {
    Error::Structure(msg.into())
}
