use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity violated an analytic invariant by more than the allowed
    /// numerical tolerance (e.g. a fidelity invariant went negative).
    #[error("numeric-domain error: invariant {invariant} violated, value {value:e}")]
    NumericDomain { invariant: &'static str, value: f64 },

    /// The finite-difference step is so small that the fidelity rounds to 1
    /// in working precision.
    #[error("finite-difference step {step:e} underflows: fidelity rounds to 1")]
    StepUnderflow { step: f64 },

    /// A parameter is outside the numerically supported range.
    #[error("unsupported range: {0}")]
    UnsupportedRange(String),

    /// A truncated table misses too much probability mass.
    #[error("truncation deficit {deficit:e} exceeds bound {bound:e}; try cutoff >= {suggested_cutoff}")]
    Truncation {
        deficit: f64,
        bound: f64,
        suggested_cutoff: usize,
    },

    /// An estimator was called with no samples.
    #[error("estimator requires at least one sample")]
    EmptySamples,

    /// A series evaluation broke down numerically.
    #[error("series breakdown: {0}")]
    SeriesBreakdown(String),

    /// The requested receiver does not exist at this scenario point.
    #[error("receiver does not exist at theta={theta}: (C+D)^2 - 4E^2 = {diagnostic:e} <= 0")]
    ReceiverNotExists { theta: f64, diagnostic: f64 },

    /// Invalid experiment configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
