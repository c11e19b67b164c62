//! Maximum-likelihood estimators for the three simulated transceivers and
//! the two-stage protocol that spends the first `n^beta` probes on a
//! coherent pre-estimate to tune the receiver.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::CoreError;
use crate::fisher::{maximize_opa_gain, nbar_opa};
use crate::montecarlo::{sample_geometric, sample_homodyne, HomodyneModel, PairSampler};
use crate::receiver::{
    existence_boundary, output_pair_pmf, pair_probs, receiver_exists, sld_params,
};
use crate::scenario::Scenario;
use crate::Result;

/// Which transceiver the two-stage protocol drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoStageKind {
    /// Coherent probes + homodyne; degenerates to a single stage.
    Coherent,
    /// TMSV probes + OPA receiver tuned by the pre-estimate.
    Opa,
    /// TMSV probes + squeezer/PNR receiver tuned by the pre-estimate.
    Tmsv,
}

/// Indicator flags describing which fallback paths an estimate took.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// Raw estimate fell outside the admissible interval and was clamped.
    pub clamped: bool,
    /// Stage-1 estimate left the receiver-existence region and was
    /// projected back inside.
    pub receiver_fallback: bool,
    /// Likelihood maximizer sat at an interval boundary.
    pub likelihood_boundary: bool,
    /// An observed count pair fell outside the truncated pmf support.
    pub out_of_support: bool,
}

/// An estimate together with the optional stage-1 pre-estimate and flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub stage1_theta: Option<f64>,
    pub flags: EstimateFlags,
}

/// Knobs shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Admissible interval for theta estimates.
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Stage-1 exponent: `ceil(n^beta)` coherent probes.
    pub beta: f64,
    /// PNR resolution of the squeezer receiver.
    pub cutoff: u32,
    /// Coarse likelihood grid size for the pair-count MLE.
    pub grid_points: usize,
    /// Golden-section convergence tolerance on theta.
    pub tol: f64,
    /// Homodyne output model for stage 1 / coherent sensing.
    pub homodyne: HomodyneModel,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            theta_lo: 1e-4,
            theta_hi: 1.0 - 1e-4,
            beta: 0.5,
            cutoff: 9,
            grid_points: 64,
            tol: 1e-6,
            homodyne: HomodyneModel::FisherCalibrated,
        }
    }
}

fn clamp(theta: f64, opts: &EstimatorOptions, flags: &mut EstimateFlags) -> f64 {
    if theta < opts.theta_lo {
        flags.clamped = true;
        opts.theta_lo
    } else if theta > opts.theta_hi {
        flags.clamped = true;
        opts.theta_hi
    } else {
        theta
    }
}

/// MLE for coherent probes + homodyne: `theta = mean(x)^2 / ns`.
pub fn mle_coherent(samples: &[f64], ns: f64, opts: &EstimatorOptions) -> Result<EstimateResult> {
    if samples.is_empty() {
        return Err(CoreError::EmptySamples);
    }
    if !(ns > 0.0) {
        return Err(CoreError::Domain(format!(
            "coherent MLE needs ns > 0, got {ns}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut flags = EstimateFlags::default();
    let theta_hat = clamp(mean * mean / ns, opts, &mut flags);
    Ok(EstimateResult {
        theta_hat,
        stage1_theta: None,
        flags,
    })
}

/// OPA count MLE from the sample mean, closed form.
///
/// Derived by inverting the mean-count map, quadratic in `sqrt(theta)`.
/// The printed form of this estimator carries a typo inside its radical
/// (`1 + y + nb - G ns`); the inversion identity holds with
/// `1 + y - (G-1) nb`, which is what is implemented here.
pub fn mle_opa_from_mean(
    ybar: f64,
    g_star: f64,
    ns: f64,
    nb: f64,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    if !(g_star > 1.0) {
        return Err(CoreError::Domain(format!(
            "OPA MLE needs G* > 1, got {g_star}"
        )));
    }
    if !(ns > 0.0) {
        return Err(CoreError::Domain(format!("OPA MLE needs ns > 0, got {ns}")));
    }
    let g = g_star;
    let gm1 = g - 1.0;
    let mut flags = EstimateFlags::default();
    let radicand = 1.0 + ybar - gm1 * nb;
    let raw = if radicand < 0.0 {
        flags.clamped = true;
        opts.theta_lo
    } else {
        (ybar * gm1 - 1.0 - nb) / (gm1 * gm1 * ns)
            - 2.0 * (g * (1.0 + ns) * radicand).sqrt() / (gm1 * ns)
            + g * (g + 2.0 * nb - g * nb + gm1 * ns) / (gm1 * gm1 * ns)
    };
    let theta_hat = clamp(raw, opts, &mut flags);
    Ok(EstimateResult {
        theta_hat,
        stage1_theta: None,
        flags,
    })
}

/// MLE for TMSV + OPA receiver from raw photon counts.
pub fn mle_opa(
    samples: &[u64],
    g_star: f64,
    ns: f64,
    nb: f64,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    if samples.is_empty() {
        return Err(CoreError::EmptySamples);
    }
    let ybar = samples.iter().map(|&y| y as f64).sum::<f64>() / samples.len() as f64;
    mle_opa_from_mean(ybar, g_star, ns, nb, opts)
}

/// MLE for the squeezer+PNR receiver by numerical likelihood maximization.
///
/// Samples are aggregated into a count histogram; the log-likelihood
/// `sum count * ln p(z0, z1; theta)` is evaluated on a coarse grid over
/// the admissible interval and refined by golden section. Both the
/// diagonal weights and the diagonalizing squeeze depend on `theta`, so
/// the pair probabilities are rebuilt at every candidate; `omega0` (the
/// receiver setting the data was taken with) is held fixed. Pairs outside
/// the cutoff support contribute the truncation-deficit floor.
pub fn mle_tmsv(
    samples: &[(u32, u32)],
    omega0: f64,
    ns: f64,
    nb: f64,
    cutoff: u32,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    if samples.is_empty() {
        return Err(CoreError::EmptySamples);
    }
    let mut flags = EstimateFlags::default();
    let mut hist: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut n_out = 0u64;
    for &(z0, z1) in samples {
        if z0 > cutoff || z1 > cutoff {
            n_out += 1;
            flags.out_of_support = true;
        } else {
            *hist.entry((z0, z1)).or_insert(0) += 1;
        }
    }
    let cells: Vec<(u32, u32)> = hist.keys().copied().collect();
    let counts: Vec<u64> = hist.values().copied().collect();

    let log_lik = |theta: f64| -> f64 {
        let s = Scenario::new(theta, ns, nb).expect("theta in (0,1)");
        let probs = pair_probs(&s, omega0, &cells);
        let mut ll = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            ll += c as f64 * probs[i].max(1e-300).ln();
        }
        if n_out > 0 {
            // closed-form diagonal-mass deficit as the out-of-support floor
            let p = sld_params(&s);
            let rho1 = p.n1 / (1.0 + p.n1);
            let rho2 = p.n2 / (1.0 + p.n2);
            let deficit = 1.0
                - (1.0 - rho1.powi(cutoff as i32 + 1)) * (1.0 - rho2.powi(cutoff as i32 + 1));
            ll += n_out as f64 * deficit.max(1e-300).ln();
        }
        ll
    };

    let npts = opts.grid_points.max(8);
    let grid =
        |i: usize| opts.theta_lo + (opts.theta_hi - opts.theta_lo) * i as f64 / (npts - 1) as f64;
    let mut best = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..npts {
        let ll = log_lik(grid(i));
        if ll > best_ll {
            best_ll = ll;
            best = i;
        }
    }
    let mut a = grid(best.saturating_sub(1));
    let mut b = grid((best + 1).min(npts - 1));
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = log_lik(c);
    let mut fd = log_lik(d);
    while b - a > opts.tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = log_lik(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = log_lik(d);
        }
    }
    let theta_hat = 0.5 * (a + b);
    if best == 0 || best == npts - 1 {
        flags.likelihood_boundary = true;
    }
    if (theta_hat - opts.theta_lo).abs() < 2.0 * opts.tol
        || (theta_hat - opts.theta_hi).abs() < 2.0 * opts.tol
    {
        flags.likelihood_boundary = true;
    }
    Ok(EstimateResult {
        theta_hat,
        stage1_theta: None,
        flags,
    })
}

/// Project a pre-estimate into the receiver-existence region with a small
/// interior margin; identity when the receiver already exists there.
fn project_into_existence(
    theta0: f64,
    ns: f64,
    nb: f64,
    flags: &mut EstimateFlags,
) -> f64 {
    let s = match Scenario::new(theta0, ns, nb) {
        Ok(s) => s,
        Err(_) => return theta0,
    };
    if receiver_exists(&s) {
        return theta0;
    }
    flags.receiver_fallback = true;
    match existence_boundary(ns, nb) {
        Some(b) => (b + 1e-3).min(1.0 - 1e-4),
        None => theta0,
    }
}

/// Run the two-stage protocol: `ceil(n^beta)` coherent probes produce a
/// rough pre-estimate that configures the receiver (OPA gain or squeeze
/// setting); the remaining probes drive the matching MLE. Data from the
/// two stages are disjoint.
pub fn two_stage_estimate<R: Rng>(
    kind: TwoStageKind,
    n: u64,
    s_true: &Scenario,
    rng: &mut R,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    if n < 4 {
        return Err(CoreError::Domain(format!(
            "two-stage protocol needs n >= 4, got {n}"
        )));
    }
    if kind == TwoStageKind::Coherent {
        // no receiver tuning needed; the protocol collapses to one stage
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_homodyne(s_true, opts.homodyne, rng))
            .collect();
        return mle_coherent(&xs, s_true.ns(), opts);
    }

    let n1 = (n as f64).powf(opts.beta).ceil() as u64;
    let n1 = n1.min(n - 1).max(1);
    let n2 = n - n1;
    let xs: Vec<f64> = (0..n1)
        .map(|_| sample_homodyne(s_true, opts.homodyne, rng))
        .collect();
    let stage1 = mle_coherent(&xs, s_true.ns(), opts)?;
    let theta0 = stage1.theta_hat;
    let mut flags = stage1.flags;

    let result = match kind {
        TwoStageKind::Coherent => unreachable!(),
        TwoStageKind::Opa => {
            let s0 = Scenario::new(theta0, s_true.ns(), s_true.nb())?;
            let g_star = maximize_opa_gain(&s0).gain;
            let nbar = nbar_opa(s_true, g_star)?;
            let ys: Vec<u64> = (0..n2).map(|_| sample_geometric(nbar, rng)).collect();
            mle_opa(&ys, g_star, s_true.ns(), s_true.nb(), opts)?
        }
        TwoStageKind::Tmsv => {
            let theta_used = project_into_existence(theta0, s_true.ns(), s_true.nb(), &mut flags);
            let s0 = Scenario::new(theta_used, s_true.ns(), s_true.nb())?;
            let omega0 = sld_params(&s0)
                .omega()
                .ok_or_else(|| CoreError::ReceiverNotExists {
                    theta: theta_used,
                    diagnostic: sld_params(&s0).diagnostic,
                })?;
            let pmf = output_pair_pmf(s_true, omega0, opts.cutoff)?;
            let sampler = PairSampler::new(&pmf);
            let zs: Vec<(u32, u32)> = (0..n2).map(|_| sampler.sample(rng)).collect();
            mle_tmsv(&zs, omega0, s_true.ns(), s_true.nb(), opts.cutoff, opts)?
        }
    };
    flags.clamped |= result.flags.clamped;
    flags.likelihood_boundary |= result.flags.likelihood_boundary;
    flags.out_of_support |= result.flags.out_of_support;
    Ok(EstimateResult {
        theta_hat: result.theta_hat,
        stage1_theta: Some(theta0),
        flags,
    })
}
