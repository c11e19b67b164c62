//! Closed-form quantum and classical Fisher information for the six
//! transmittance-sensing schemes, and the photon Fisher information
//! efficiency (FI per transmitted photon per mode) used to compare them.
//!
//! The Fock-probe quantities are built on a terminating Gauss
//! hypergeometric series evaluated at negative-integer parameters. For
//! non-positive argument the series is single-signed and is summed in log
//! space; for positive argument it alternates and loses precision
//! catastrophically beyond k ~ 30 in f64, so larger orders switch to exact
//! big-rational summation of the same finite sum.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::scenario::{thermal_pmf, Scenario};
use crate::special::{ln_factorial, signed_logsumexp, LogSigned};
use crate::Result;

/// Sensing scheme selector for [`pfie`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiMethod {
    /// Ultimate quantum bound over all probes.
    UltimateBound,
    /// TMSV probe, optimal measurement (quantum FI).
    Tmsv,
    /// Coherent probe, optimal measurement (quantum FI).
    Coherent,
    /// TMSV probe, optical parametric amplifier + photon counting.
    TmsvOpa,
    /// m-photon Fock probe, photon counting (m >= 1).
    Fock(u32),
    /// Single-photon Fock probe.
    SinglePhoton,
    /// TMSV probe with idler-heralded Fock statistics.
    TmsvHeralded,
}

/// Result of the OPA gain optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpaResult {
    /// Optimal gain, strictly > 1.
    pub gain: f64,
    /// Classical FI at the optimal gain.
    pub fi: f64,
    /// Mean output photon number at the optimal gain.
    pub nbar_opa: f64,
}

/// Heralded classical FI together with a truncation warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldedFi {
    pub value: f64,
    /// Set when `ns > 4` and the heralding sum is capped at m = 30, where
    /// the truncation is known to lose accuracy.
    pub truncated: bool,
}

/// Upper bound on the FI per transmitted photon per mode over all probes:
/// `1 / (theta (nb + 1 - theta))`.
pub fn qfi_upper_bound_per_photon(s: &Scenario) -> f64 {
    1.0 / (s.theta() * (s.nb() + 1.0 - s.theta()))
}

/// Quantum FI of a single TMSV probe.
pub fn qfi_tmsv(s: &Scenario) -> f64 {
    let (th, ns, nb) = (s.theta(), s.ns(), s.nb());
    ns * (nb + 1.0 + (1.0 - th) * ns + nb * ns)
        / (th * (nb + 1.0 - th) * (nb + 1.0 + ns * (2.0 * nb + 1.0 - th)))
}

/// Quantum FI of a coherent probe: `ns / (theta (2 nb + 1))`.
pub fn qfi_coherent(s: &Scenario) -> f64 {
    s.ns() / (s.theta() * (2.0 * s.nb() + 1.0))
}

/// The coherent-probe efficiency as printed in the PFIE catalog,
/// `1 / (2 theta (nb + 1))`.
///
/// This is NOT `qfi_coherent / ns = 1 / (theta (2 nb + 1))`: the two
/// published expressions disagree by the factor `(2nb+2)/(2nb+1)` and are
/// both kept as written. [`coherent_pfie_consistent`] reports whether they
/// agree at a given scenario (they never do for nb finite); [`pfie`]
/// follows the FI-per-photon definition, i.e. `qfi_coherent / ns`.
pub fn pfie_coherent_catalog(s: &Scenario) -> f64 {
    1.0 / (2.0 * s.theta() * (s.nb() + 1.0))
}

/// Whether the two published coherent-efficiency expressions agree at `s`.
pub fn coherent_pfie_consistent(s: &Scenario) -> bool {
    let a = qfi_coherent(s) / s.ns();
    let b = pfie_coherent_catalog(s);
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Mean photon number at the retained OPA output for gain `g >= 1`.
pub fn nbar_opa(s: &Scenario, g: f64) -> Result<f64> {
    if !(g >= 1.0) {
        return Err(CoreError::Domain(format!("OPA gain must be >= 1, got {g}")));
    }
    let (th, ns, nb) = (s.theta(), s.ns(), s.nb());
    Ok(g * ns
        + (g - 1.0) * (nb + 1.0 + th * ns)
        + 2.0 * (g * (g - 1.0) * th * ns * (ns + 1.0)).sqrt())
}

/// Classical FI of the geometric photon count at fixed OPA gain `g > 1`.
pub fn opa_fi_at_gain(s: &Scenario, g: f64) -> Result<f64> {
    if !(g > 1.0) {
        return Err(CoreError::Domain(format!("OPA gain must be > 1, got {g}")));
    }
    let (th, ns, nb) = (s.theta(), s.ns(), s.nb());
    let _ = nb;
    let nbar = nbar_opa(s, g)?;
    let num = (g - 1.0) * ns + (g * (g - 1.0) * ns * (ns + 1.0) / th).sqrt();
    Ok(num * num / (nbar * (nbar + 1.0)))
}

const OPA_GAIN_EPS: f64 = 1e-9;

/// Maximize the OPA classical FI over the gain.
///
/// Scans 200 log-spaced points of `g - 1` on `[1e-9, 9]` and refines the
/// best bracket by golden section. For small `ns` the optimum approaches
/// the `g -> 1` boundary; the returned gain is then `1 + epsilon`-like but
/// always strictly above 1.
pub fn maximize_opa_gain(s: &Scenario) -> OpaResult {
    if s.ns() == 0.0 {
        let gain = 1.0 + OPA_GAIN_EPS;
        return OpaResult {
            gain,
            fi: 0.0,
            nbar_opa: nbar_opa(s, gain).expect("gain >= 1"),
        };
    }
    let npts = 200;
    let (lo, hi) = (OPA_GAIN_EPS.ln(), 9.0_f64.ln());
    let gm1 = |i: usize| (lo + (hi - lo) * i as f64 / (npts - 1) as f64).exp();
    let fi_of = |g: f64| opa_fi_at_gain(s, g).expect("g > 1");
    let mut best = 0usize;
    let mut best_fi = f64::NEG_INFINITY;
    for i in 0..npts {
        let v = fi_of(1.0 + gm1(i));
        if v > best_fi {
            best_fi = v;
            best = i;
        }
    }
    let mut a = 1.0 + gm1(best.saturating_sub(1));
    let mut b = 1.0 + gm1((best + 1).min(npts - 1));
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = fi_of(c);
    let mut fd = fi_of(d);
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = fi_of(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = fi_of(d);
        }
        if b - a < 1e-13 * a.max(1.0) {
            break;
        }
    }
    let gain = 0.5 * (a + b);
    OpaResult {
        gain,
        fi: fi_of(gain),
        nbar_opa: nbar_opa(s, gain).expect("gain >= 1"),
    }
}

// ---------------------------------------------------------------------------
// Terminating hypergeometric series
// ---------------------------------------------------------------------------

/// k above which the alternating (z > 0) series switches to exact rational
/// summation; measured f64 error at z ~ 0.43 stays below 1e-7 up to k = 20
/// and blows past unity near k = 40.
const F2F1_RATIONAL_K: u64 = 12;
/// Hard cap on the exact-rational order to bound big-integer growth.
const F2F1_MAX_K: u64 = 2000;

fn log_2f1_float(k: u64, mk: u64, z: f64) -> LogSigned {
    if k == 0 || z == 0.0 {
        return LogSigned::new(1.0, 0.0);
    }
    let (ku, mku) = (k as usize, mk as usize);
    let ln_z = z.abs().ln();
    let mut terms = Vec::with_capacity(ku + 1);
    for j in 0..=ku {
        let ln = 2.0 * (ln_factorial(ku) - ln_factorial(ku - j)) + ln_factorial(mku - j)
            - ln_factorial(mku)
            - ln_factorial(j)
            + j as f64 * ln_z;
        // term sign is (-1)^j z^j: positive for z < 0, alternating for z > 0
        let sign = if z > 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
        terms.push(LogSigned::new(sign, ln));
    }
    signed_logsumexp(&terms)
}

fn log_of_bigrational(x: &BigRational) -> LogSigned {
    if x.is_zero() {
        return LogSigned::ZERO;
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    let ln = |n: &BigInt| -> f64 {
        let bits = n.bits();
        if bits <= 63 {
            let v: f64 = n.magnitude().to_string().parse().unwrap_or(1.0);
            v.ln()
        } else {
            let shift = bits - 63;
            let top = n.magnitude() >> shift;
            let v: f64 = top.to_string().parse().unwrap_or(1.0);
            v.ln() + shift as f64 * std::f64::consts::LN_2
        }
    };
    LogSigned::new(sign, ln(x.numer()) - ln(x.denom()))
}

fn log_2f1_rational(k: u64, mk: u64, z: f64) -> LogSigned {
    let zr = BigRational::from_float(z).expect("finite z");
    let mut total = BigRational::zero();
    let mut coeff = BigRational::one(); // [k!/(k-j)!]^2 (mk-j)!/mk! / j!, running
    let mut zpow = BigRational::one();
    for j in 0..=k {
        if j > 0 {
            let kj = BigInt::from(k - j + 1);
            coeff = coeff * BigRational::from_integer(&kj * &kj)
                / BigRational::from_integer(BigInt::from(mk - j + 1) * BigInt::from(j));
            zpow *= &zr;
        }
        let term = &coeff * &zpow;
        if j % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    log_of_bigrational(&total)
}

/// (sign, ln|value|) of the terminating series; shared by the Fock pmf and
/// FI evaluations so tails compose in log space.
pub(crate) fn log_2f1_terminating(k: u64, mk: u64, z: f64) -> Result<LogSigned> {
    if mk < k {
        return Err(CoreError::Domain(format!(
            "terminating 2F1 requires m + k >= k, got k={k}, mk={mk}"
        )));
    }
    if k > F2F1_MAX_K {
        return Err(CoreError::UnsupportedRange(format!(
            "terminating 2F1 order k={k} exceeds the supported {F2F1_MAX_K}"
        )));
    }
    if z > 0.0 && k > F2F1_RATIONAL_K {
        Ok(log_2f1_rational(k, mk, z))
    } else {
        Ok(log_2f1_float(k, mk, z))
    }
}

/// Terminating Gauss series `2F1(-k, -k; -(m+k); z)` with `mk = m + k`.
///
/// The sum has `k + 1` terms exactly; the two-term case is
/// `1 - z / (m + 1)` (the `j = 1` term carries the Pochhammer sign).
pub fn hypergeom_2f1_terminating(k: u64, mk: u64, z: f64) -> Result<f64> {
    Ok(log_2f1_terminating(k, mk, z)?.value())
}

// ---------------------------------------------------------------------------
// Fock-probe statistics
// ---------------------------------------------------------------------------

fn z_argument(th: f64, nb: f64) -> f64 {
    (th - nb) * (nb + 1.0) / th
}

/// Photon-count pmf at the channel output for an m-photon Fock probe.
///
/// For `nb = 0` the count is binomial(m, theta). Probabilities below
/// 1e-300 are flushed to zero.
pub fn fock_output_pmf(k: u64, m: u32, s: &Scenario) -> Result<f64> {
    if m == 0 {
        return Err(CoreError::Domain("Fock probe needs m >= 1".into()));
    }
    let (th, nb) = (s.theta(), s.nb());
    let m = m as u64;
    if nb == 0.0 {
        if k > m {
            return Ok(0.0);
        }
        let (ku, mu) = (k as usize, m as usize);
        let ln = ln_factorial(mu) - ln_factorial(ku) - ln_factorial(mu - ku)
            + k as f64 * th.ln()
            + (m - k) as f64 * (1.0 - th).ln();
        return Ok(ln.exp());
    }
    let (ku, mu) = (k as usize, m as usize);
    let ln_pref = ln_factorial(mu + ku) - ln_factorial(mu) - ln_factorial(ku)
        + (m as f64 - k as f64) * (nb + 1.0 - th).ln()
        + k as f64 * th.ln()
        - (m + k + 1) as f64 * (nb + 1.0).ln();
    let h = log_2f1_terminating(k, m + k, z_argument(th, nb))?;
    let ln = ln_pref + h.ln_abs;
    if ln < -690.0 {
        return Ok(0.0);
    }
    let v = h.sign * ln.exp();
    // the pmf is a probability; tiny negative values are tail roundoff
    if v < 0.0 && v > -1e-250 {
        return Ok(0.0);
    }
    Ok(v)
}

/// Relative tail rule from the series design: stop once this many
/// consecutive terms contribute less than 1e-14 relative.
const TAIL_CONSECUTIVE: u32 = 20;
const TAIL_REL: f64 = 1e-14;

/// Below this `nb` the thermal Fock formulas are numerically singular
/// (the hypergeometric argument approaches 1); the pure-loss limit is used
/// instead, which differs from the exact value by O(nb).
const NB_PURE_LOSS_FLOOR: f64 = 1e-8;

/// Quantum FI of an m-photon Fock probe, `1 <= m <= 30`.
///
/// Five closed-form terms plus the hypergeometric remainder series; for
/// `nb` at or below the pure-loss floor this returns `m/(theta(1-theta))`.
pub fn qfi_fock(m: u32, s: &Scenario) -> Result<f64> {
    if m == 0 || m > 30 {
        return Err(CoreError::UnsupportedRange(format!(
            "qfi_fock supports 1 <= m <= 30 (numerical feasibility), got {m}"
        )));
    }
    let (th, nb) = (s.theta(), s.nb());
    if nb <= NB_PURE_LOSS_FLOOR {
        return Ok(m as f64 / (th * (1.0 - th)));
    }
    let mf = m as f64;
    let denom = nb + 1.0 - th;
    let closed = mf * ((1.0 - th) / (denom * denom) + 1.0 / th)
        - nb * (1.0 / (denom * denom) - 1.0 / (th * th))
        - 2.0 * nb * (th * mf + nb + 1.0) / (denom * th * th)
        - 2.0 * nb * nb * (2.0 * (th * mf + nb + th * mf * nb) + nb * nb + 1.0)
            / (denom * denom * th * th)
        - nb * nb * mf * (mf - 1.0) / (denom * denom);

    let z = z_argument(th, nb);
    let m64 = m as u64;
    let mut remainder = 0.0_f64;
    let mut quiet = 0u32;
    for k in 1..=F2F1_MAX_K {
        let (ku, mu) = (k as usize, m as usize);
        let ln_pref = ln_factorial(mu + ku) - ln_factorial(mu) - ln_factorial(ku)
            + 4.0 * (k as f64).ln()
            + 2.0 * nb.ln()
            + (mf - k as f64) * denom.ln()
            + (k as f64 - 4.0) * th.ln()
            - 2.0 * ((m64 + k) as f64).ln()
            - (m64 + k - 1) as f64 * (nb + 1.0).ln();
        let h1 = log_2f1_terminating(k - 1, m64 + k - 1, z)?;
        let h0 = log_2f1_terminating(k, m64 + k, z)?;
        if h0.is_zero() {
            return Err(CoreError::SeriesBreakdown(format!(
                "vanishing hypergeometric denominator at k={k} (theta={th}, nb={nb})"
            )));
        }
        let expo = ln_pref + 2.0 * h1.ln_abs - h0.ln_abs;
        if expo > 700.0 {
            return Err(CoreError::SeriesBreakdown(format!(
                "remainder term overflow at k={k} (theta={th}, nb={nb}); nb too small for the thermal form"
            )));
        }
        let term = if expo < -745.0 {
            0.0
        } else {
            (h1.sign * h1.sign / h0.sign) * expo.exp()
        };
        remainder += term;
        if term.abs() < TAIL_REL * remainder.abs().max(1e-300) {
            quiet += 1;
            if quiet >= TAIL_CONSECUTIVE {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(closed + remainder)
}

/// Quantum FI of a single-photon probe via the dedicated series.
pub fn qfi_singlephoton(s: &Scenario) -> f64 {
    let (th, nb) = (s.theta(), s.nb());
    if nb <= NB_PURE_LOSS_FLOOR {
        return 1.0 / (th * (1.0 - th));
    }
    // k = 0 term rearranged so nb^(k-1) never underflows
    let mut total = 1.0 / ((nb + 1.0) * (nb + 1.0) * (nb + 1.0 - th));
    let mut quiet = 0u32;
    for k in 1..200_000u64 {
        let kf = k as f64;
        let ln = (kf - 1.0) * nb.ln() - (kf + 2.0) * (nb + 1.0).ln();
        let term = (kf - nb) * (kf - nb) * ln.exp() / (nb * (nb + 1.0) + th * (kf - nb));
        total += term;
        if term < TAIL_REL * total {
            quiet += 1;
            if quiet >= TAIL_CONSECUTIVE {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    total
}

/// Classical FI of the heralded scheme: idler photon counting prepares a
/// Fock probe of thermal-weighted order, `sum_m q(m; ns) J_Fock(m)` with
/// the sum capped at `m_max <= 30`.
pub fn cfi_heralded(s: &Scenario, m_max: u32) -> Result<HeraldedFi> {
    if m_max > 30 {
        return Err(CoreError::UnsupportedRange(format!(
            "cfi_heralded supports m_max <= 30, got {m_max}"
        )));
    }
    if s.ns() == 0.0 {
        return Ok(HeraldedFi {
            value: 0.0,
            truncated: false,
        });
    }
    let mut value = 0.0;
    for m in 1..=m_max {
        value += thermal_pmf(m as u64, s.ns())? * qfi_fock(m, s)?;
    }
    Ok(HeraldedFi {
        value,
        truncated: s.ns() > 4.0 && m_max == 30,
    })
}

/// FI per transmitted photon per mode for the chosen scheme (per probe
/// photon `m` for Fock probes).
pub fn pfie(method: FiMethod, s: &Scenario) -> Result<f64> {
    let per_ns = |fi: f64| -> Result<f64> {
        if s.ns() == 0.0 {
            return Err(CoreError::Domain(
                "PFIE per transmitted photon needs ns > 0".into(),
            ));
        }
        Ok(fi / s.ns())
    };
    match method {
        FiMethod::UltimateBound => Ok(qfi_upper_bound_per_photon(s)),
        FiMethod::Tmsv => per_ns(qfi_tmsv(s)),
        FiMethod::Coherent => per_ns(qfi_coherent(s)),
        FiMethod::TmsvOpa => per_ns(maximize_opa_gain(s).fi),
        FiMethod::Fock(m) => {
            if m == 0 {
                return Err(CoreError::Domain("Fock probe needs m >= 1".into()));
            }
            Ok(qfi_fock(m, s)? / m as f64)
        }
        FiMethod::SinglePhoton => Ok(qfi_singlephoton(s)),
        FiMethod::TmsvHeralded => per_ns(cfi_heralded(s, 30)?.value),
    }
}
