//! Quantum-limited transmittance estimation in thermal noise.
//!
//! A sensor probes a lossy bosonic channel of unknown power transmittance
//! `theta` whose environment injects thermal noise. This crate provides the
//! numerical machinery to study how well `theta` can be estimated:
//!
//! - [`gaussian`]: phase-space covariance matrices for the two-mode
//!   squeezed vacuum (TMSV) probe, the loss channel, Gaussian-state
//!   fidelity, and a fidelity-based numerical quantum Fisher information.
//! - [`fisher`]: closed-form quantum/classical Fisher information for six
//!   sensing schemes (ultimate bound, TMSV, coherent, TMSV+OPA, Fock,
//!   single photon, TMSV+heralded) and their per-photon efficiencies.
//! - [`receiver`]: the quantum-CRB-achieving receiver for TMSV probes — a
//!   two-mode squeezer followed by photon-number-resolving detection —
//!   including its existence region, Fock-basis squeezer matrix elements,
//!   the joint photon-pair output distribution, and a numerical check of
//!   the symmetric-logarithmic-derivative eigenstructure.
//! - [`estimators`]: maximum-likelihood estimators for the three simulated
//!   transceivers and the two-stage protocol that first pre-estimates
//!   `theta` with coherent probes to tune the receiver.
//! - [`montecarlo`]: reproducible samplers and the parallel MSE-convergence
//!   experiment.
//!
//! All quadrature conventions use vacuum variance 1/2 per quadrature, and
//! covariance matrices are stored in (q1, q2, p1, p2) ordering.

pub mod error;
pub mod estimators;
pub mod fisher;
pub mod gaussian;
pub mod montecarlo;
pub mod receiver;
pub mod scenario;
mod special;

pub use error::CoreError;
pub use scenario::Scenario;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
