//! Error taxonomy shared by every engine in the crate.
//!
//! Variants are chosen so that callers can map failures onto distinct
//! process exit codes without parsing message strings.

use thiserror::Error;

/// Errors produced by configuration validation and the analysis engines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation
    /// (rank out of range, non-positive rate, malformed sweep value, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The configuration is structurally valid but exceeds a hard size cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The configured system has no stationary age distribution: updates can
    /// never be delivered, so the average age grows without bound.
    #[error("divergent configuration: {0}")]
    Divergent(String),

    /// A conditional quantity was requested for an event of probability zero.
    #[error("impossible event: {0}")]
    ImpossibleEvent(String),

    /// Numerical integration could not reach the requested tolerance.
    #[error("precision not attained: {message} (achieved error estimate {achieved:.3e})")]
    Precision {
        /// Which computation failed to converge.
        message: String,
        /// The error estimate at the point the computation gave up.
        achieved: f64,
    },

    /// A simulation run produced no usable renewal cycles.
    #[error("simulation divergence: {0}")]
    NoCycles(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
