use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// Physical parameters of a transmittance-sensing problem.
///
/// `theta` is the power transmittance to be estimated, `ns` the mean
/// transmitted photon number per mode, and `nb` the mean thermal background
/// photon number per mode. The environment mode occupation is
/// `nt = nb / (1 - theta)`, which removes the shadow effect (the background
/// alone carries no information about `theta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    theta: f64,
    ns: f64,
    nb: f64,
}

impl Scenario {
    /// Build a scenario, validating `0 < theta < 1`, `ns >= 0`, `nb >= 0`.
    ///
    /// `theta = 1` makes the environment occupation `nb/(1-theta)` singular
    /// and `theta = 0` makes the Fisher-information formulas singular, so
    /// both endpoints are excluded.
    pub fn new(theta: f64, ns: f64, nb: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(CoreError::Domain(format!(
                "theta must lie in (0, 1), got {theta}"
            )));
        }
        if !(ns >= 0.0) {
            return Err(CoreError::Domain(format!("ns must be >= 0, got {ns}")));
        }
        if !(nb >= 0.0) {
            return Err(CoreError::Domain(format!("nb must be >= 0, got {nb}")));
        }
        Ok(Self { theta, ns, nb })
    }

    /// Same scenario with a different transmittance.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(theta, self.ns, self.nb)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn ns(&self) -> f64 {
        self.ns
    }

    pub fn nb(&self) -> f64 {
        self.nb
    }

    /// Mean photon number injected by the environment mode,
    /// `nt = nb / (1 - theta)`.
    pub fn nt(&self) -> f64 {
        self.nb / (1.0 - self.theta)
    }
}

/// Bose-Einstein probability mass function `nbar^k / (1+nbar)^(k+1)`.
///
/// For `nbar = 0` this degenerates to a point mass at `k = 0`.
pub fn thermal_pmf(k: u64, nbar: f64) -> Result<f64> {
    if !(nbar >= 0.0) {
        return Err(CoreError::Domain(format!(
            "thermal_pmf requires nbar >= 0, got {nbar}"
        )));
    }
    if nbar == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let k = k as f64;
    Ok((k * nbar.ln() - (k + 1.0) * nbar.ln_1p()).exp())
}
