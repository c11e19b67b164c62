//! Phase-space representation of the TMSV probe and the lossy thermal-noise
//! channel, plus fidelity-based numerical quantum Fisher information.
//!
//! Covariance matrices are 4x4 real symmetric in (q1, q2, p1, p2) ordering
//! with vacuum variance 1/2 per quadrature. Mode 1 is the retained idler,
//! mode 2 the signal/return mode. The Gaussian fidelity used here is the
//! amplitude-type (square-root) fidelity, whose second derivative along a
//! curve of states yields the quantum Fisher information as
//! `J = -4 d^2F/d(delta)^2` at `delta = 0`.

use nalgebra::{Complex, Matrix4, SMatrix};

use crate::error::CoreError;
use crate::scenario::Scenario;
use crate::Result;

type C64 = Complex<f64>;

/// Symplectic form in (q1, q2, p1, p2) ordering: `[[0, I], [-I, 0]]`.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

/// 4x4 real symmetric covariance matrix of a zero-mean two-mode Gaussian
/// state, ordering (q1, q2, p1, p2), vacuum variance 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance {
    m: Matrix4<f64>,
}

impl TwoModeCovariance {
    /// Wrap a matrix, checking symmetry to 1e-12.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let asym = (m - m.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(CoreError::NumericDomain {
                invariant: "covariance symmetry",
                value: asym,
            });
        }
        Ok(Self { m: 0.5 * (m + m.transpose()) })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    /// Symplectic eigenvalues (nu_minus, nu_plus), both >= 1/2 for a
    /// physical state. Uses the two-mode invariant formula on the
    /// mode-wise 2x2 blocks.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let m = &self.m;
        // mode-wise blocks from (q1,q2,p1,p2) ordering
        let det_a = m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)];
        let det_b = m[(1, 1)] * m[(3, 3)] - m[(1, 3)] * m[(3, 1)];
        let det_c = m[(0, 1)] * m[(2, 3)] - m[(0, 3)] * m[(2, 1)];
        let det_s = self.m.determinant();
        let delta = det_a + det_b + 2.0 * det_c;
        let inner = (delta * delta - 4.0 * det_s).max(0.0).sqrt();
        let lo = ((delta - inner) / 2.0).max(0.0).sqrt();
        let hi = ((delta + inner) / 2.0).max(0.0).sqrt();
        (lo, hi)
    }

    /// Minimum eigenvalue of the Hermitian matrix `Sigma + (i/2) Omega`.
    ///
    /// The uncertainty relation requires it to be >= 0 up to numerical
    /// tolerance. Computed through the real-symmetric 8x8 embedding
    /// `[[A, -B], [B, A]]` of `A + iB`.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let a = self.m;
        let b = 0.5 * symplectic_form();
        let mut big = SMatrix::<f64, 8, 8>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                big[(i, j)] = a[(i, j)];
                big[(i + 4, j + 4)] = a[(i, j)];
                big[(i, j + 4)] = -b[(i, j)];
                big[(i + 4, j)] = b[(i, j)];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(big);
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Check the uncertainty relation within `tol`.
    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        self.min_uncertainty_eigenvalue() >= -tol
    }
}

/// Covariance matrix of a two-mode squeezed vacuum with mean photon number
/// `ns` per mode: diagonal `ns + 1/2`, qq off-diagonal `+u2`, pp
/// off-diagonal `-u2`, with `u2 = sqrt(ns(ns+1))`.
pub fn tmsv_covariance(ns: f64) -> Result<TwoModeCovariance> {
    if !(ns >= 0.0) {
        return Err(CoreError::Domain(format!(
            "tmsv_covariance requires ns >= 0, got {ns}"
        )));
    }
    let u1 = ns + 0.5;
    let u2 = (ns * (ns + 1.0)).sqrt();
    TwoModeCovariance::new(Matrix4::new(
        u1, u2, 0.0, 0.0, //
        u2, u1, 0.0, 0.0, //
        0.0, 0.0, u1, -u2, //
        0.0, 0.0, -u2, u1,
    ))
}

/// Apply the lossy thermal-noise channel to the signal mode (mode 2):
/// `X Sigma X^T + Y` with `X = diag(1, sqrt(theta), 1, sqrt(theta))` and
/// `Y = diag(0, nb + 1/2 - theta/2, 0, nb + 1/2 - theta/2)`.
pub fn apply_loss_channel(sigma_in: &TwoModeCovariance, s: &Scenario) -> TwoModeCovariance {
    let rt = s.theta().sqrt();
    let x = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, rt, 1.0, rt));
    let yv = s.nb() + 0.5 - 0.5 * s.theta();
    let y = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, yv, 0.0, yv));
    let m = x * sigma_in.matrix() * x.transpose() + y;
    TwoModeCovariance::new(m).expect("loss channel preserves symmetry")
}

/// Covariance of the channel output for a TMSV input at scenario `s`.
pub fn output_covariance(s: &Scenario) -> TwoModeCovariance {
    let probe = tmsv_covariance(s.ns()).expect("valid ns");
    apply_loss_channel(&probe, s)
}

fn det4_complex(m: &Matrix4<C64>) -> C64 {
    m.determinant()
}

/// Uhlmann (amplitude-type) fidelity between two zero-mean two-mode
/// Gaussian states given their covariance matrices.
///
/// `F = 1 / sqrt( sqrt(G) + sqrt(L) - sqrt((sqrt(G)+sqrt(L))^2 - D) )` with
/// symplectic invariants `D = det(S1+S2)`,
/// `G = 16 det(Om S1 Om S2 - I/4)`, and
/// `L = 16 det(S1 + i Om/2) det(S2 + i Om/2)`.
///
/// The invariants satisfy `D >= 1`, `G >= D`, `L >= 0` analytically;
/// violations beyond 1e-10 raise a numeric-domain error, smaller negative
/// radicands are clamped to zero.
pub fn uhlmann_fidelity(s1: &TwoModeCovariance, s2: &TwoModeCovariance) -> Result<f64> {
    const TOL: f64 = 1e-10;
    let om = symplectic_form();
    let delta = (s1.matrix() + s2.matrix()).determinant();
    let gamma = 16.0
        * (om * s1.matrix() * om * s2.matrix() - Matrix4::identity() * 0.25).determinant();
    let iom = (0.5 * om).map(|x| C64::new(0.0, x));
    let c1 = s1.matrix().map(|x| C64::new(x, 0.0)) + iom;
    let c2 = s2.matrix().map(|x| C64::new(x, 0.0)) + iom;
    let lambda = 16.0 * (det4_complex(&c1) * det4_complex(&c2)).re;

    if delta < 1.0 - TOL {
        return Err(CoreError::NumericDomain {
            invariant: "Delta >= 1",
            value: delta,
        });
    }
    if gamma < delta - TOL * delta.abs().max(1.0) {
        return Err(CoreError::NumericDomain {
            invariant: "Gamma >= Delta",
            value: gamma - delta,
        });
    }
    if lambda < -TOL {
        return Err(CoreError::NumericDomain {
            invariant: "Lambda >= 0",
            value: lambda,
        });
    }
    let sg = gamma.max(0.0).sqrt();
    let sl = lambda.max(0.0).sqrt();
    let root = sg + sl;
    let inner = root * root - delta;
    if inner < -TOL {
        return Err(CoreError::NumericDomain {
            invariant: "(sqrt(Gamma)+sqrt(Lambda))^2 >= Delta",
            value: inner,
        });
    }
    Ok(1.0 / (root - inner.max(0.0).sqrt()).sqrt())
}

/// Step-size selection for [`qfi_gaussian_numeric`].
///
/// The default is `h = min(0.08 min(theta, 1-theta) sqrt(1+nb),
/// 0.9 min(theta, 1-theta))`, which keeps the second difference of the
/// fidelity well above the f64 rounding floor across the supported
/// parameter range while the two-level Richardson extrapolation removes
/// the leading truncation terms.
pub fn default_fd_step(s: &Scenario) -> f64 {
    let margin = s.theta().min(1.0 - s.theta());
    (0.08 * margin * (1.0 + s.nb()).sqrt()).min(0.9 * margin)
}

/// Quantum Fisher information from the Gaussian fidelity,
/// `J = -4 d^2F/d(delta)^2` at `delta = 0`, by central second differences
/// at steps `h, h/2, h/4` combined with two Richardson levels.
///
/// Fails with [`CoreError::StepUnderflow`] when `F(h)` rounds to 1.
pub fn qfi_gaussian_numeric(s: &Scenario, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(CoreError::Domain(format!("step must be > 0, got {step}")));
    }
    if s.theta() - step <= 0.0 || s.theta() + step >= 1.0 {
        return Err(CoreError::Domain(format!(
            "step {step} pushes theta {} outside (0, 1)",
            s.theta()
        )));
    }
    let base = output_covariance(s);
    let second_diff = |h: f64| -> Result<f64> {
        let fp = uhlmann_fidelity(&base, &output_covariance(&s.with_theta(s.theta() + h)?))?;
        let fm = uhlmann_fidelity(&base, &output_covariance(&s.with_theta(s.theta() - h)?))?;
        if fp == 1.0 && fm == 1.0 {
            return Err(CoreError::StepUnderflow { step: h });
        }
        Ok(-4.0 * (fp - 2.0 + fm) / (h * h))
    };
    let j1 = second_diff(step)?;
    let j2 = second_diff(step / 2.0)?;
    let j4 = second_diff(step / 4.0)?;
    let r1 = (4.0 * j2 - j1) / 3.0;
    let r2 = (4.0 * j4 - j2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// [`qfi_gaussian_numeric`] with the default step from [`default_fd_step`].
pub fn qfi_gaussian_numeric_default(s: &Scenario) -> Result<f64> {
    qfi_gaussian_numeric(s, default_fd_step(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sc(theta: f64, ns: f64, nb: f64) -> Scenario {
        Scenario::new(theta, ns, nb).unwrap()
    }

    #[test]
    fn tmsv_vacuum_is_identity_over_two() {
        let v = tmsv_covariance(0.0).unwrap();
        assert_eq!(v.matrix(), &(Matrix4::identity() * 0.5));
    }

    #[test]
    fn tmsv_entries() {
        let c = tmsv_covariance(1.0).unwrap();
        assert_abs_diff_eq!(c.matrix()[(0, 0)], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.matrix()[(0, 1)], 2.0_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.matrix()[(2, 3)], -(2.0_f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn tmsv_is_pure() {
        for ns in [0.0, 0.01, 1.0, 10.0] {
            let (lo, hi) = tmsv_covariance(ns).unwrap().symplectic_eigenvalues();
            assert_abs_diff_eq!(lo, 0.5, epsilon = 1e-10);
            assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn loss_channel_identity_limit() {
        let s = sc(1.0 - 1e-12, 1.0, 0.0);
        let probe = tmsv_covariance(1.0).unwrap();
        let out = apply_loss_channel(&probe, &s);
        assert!((out.matrix() - probe.matrix()).abs().max() < 1e-11);
    }

    #[test]
    fn loss_channel_entries() {
        // (TMSV(1), theta=0.5, nb=1): w22 = 2, w12 = 1
        let s = sc(0.5, 1.0, 1.0);
        let out = output_covariance(&s);
        assert_abs_diff_eq!(out.matrix()[(1, 1)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.matrix()[(0, 1)], 1.0, epsilon = 1e-14);
        // vacuum in, thermal out
        let s0 = sc(0.5, 0.0, 1.0);
        let out0 = output_covariance(&s0);
        let expect = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.5, 1.5, 0.5, 1.5));
        assert!((out0.matrix() - expect).abs().max() < 1e-14);
    }

    #[test]
    fn loss_channel_matches_matrix_oracle() {
        // independent dense matrix-arithmetic route
        let s = sc(0.5, 1.0, 1.0);
        let probe = tmsv_covariance(1.0).unwrap();
        let rt = 0.5_f64.sqrt();
        let mut x = Matrix4::identity();
        x[(1, 1)] = rt;
        x[(3, 3)] = rt;
        let yv = 1.0 + 0.5 - 0.25;
        let mut y = Matrix4::zeros();
        y[(1, 1)] = yv;
        y[(3, 3)] = yv;
        let oracle = x * probe.matrix() * x.transpose() + y;
        let out = apply_loss_channel(&probe, &s);
        assert!((out.matrix() - oracle).abs().max() < 1e-15);
    }

    #[test]
    fn output_satisfies_uncertainty_on_grid() {
        for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for ns in [1e-3, 0.01, 0.1, 1.0] {
                for nb in [0.1, 1.0, 5.0] {
                    let cov = output_covariance(&sc(theta, ns, nb));
                    assert!(
                        cov.satisfies_uncertainty(1e-10),
                        "({theta},{ns},{nb}): min eig {}",
                        cov.min_uncertainty_eigenvalue()
                    );
                }
            }
        }
    }

    #[test]
    fn fidelity_identical_states() {
        let c = output_covariance(&sc(0.5, 0.01, 1.0));
        assert_abs_diff_eq!(uhlmann_fidelity(&c, &c).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_vacuum_vs_thermal_oracle() {
        // rho1 = |0><0| x |0><0|, rho2 = |0><0| x thermal(1). Both diagonal in
        // the Fock basis, so Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) reduces to
        // sum_k sqrt(p_k q_k); oracle computed at Fock cutoff 40.
        let v = TwoModeCovariance::new(Matrix4::identity() * 0.5).unwrap();
        let vt = TwoModeCovariance::new(Matrix4::from_diagonal(&nalgebra::Vector4::new(
            0.5, 1.5, 0.5, 1.5,
        )))
        .unwrap();
        let mut oracle = 0.0;
        for k in 0..=40u64 {
            let p = if k == 0 { 1.0 } else { 0.0 };
            let q = crate::scenario::thermal_pmf(k, 1.0).unwrap();
            oracle += (p * q).sqrt();
        }
        let f = uhlmann_fidelity(&v, &vt).unwrap();
        assert_abs_diff_eq!(f, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(f, 0.5_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_product_thermal_oracle() {
        // product of single-mode thermal fidelities 1/(sqrt((1+a)(1+b)) - sqrt(ab))
        let mk = |a: f64, b: f64| {
            TwoModeCovariance::new(Matrix4::from_diagonal(&nalgebra::Vector4::new(
                a + 0.5,
                b + 0.5,
                a + 0.5,
                b + 0.5,
            )))
            .unwrap()
        };
        let th = |a: f64, b: f64| 1.0 / (((1.0 + a) * (1.0 + b)).sqrt() - (a * b).sqrt());
        let s1 = mk(0.5, 2.0);
        let s2 = mk(1.0, 0.3);
        let expect = th(0.5, 1.0) * th(2.0, 0.3);
        assert_abs_diff_eq!(uhlmann_fidelity(&s1, &s2).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_symmetry() {
        let a = output_covariance(&sc(0.3, 0.1, 2.0));
        let b = output_covariance(&sc(0.6, 0.05, 0.5));
        let f1 = uhlmann_fidelity(&a, &b).unwrap();
        let f2 = uhlmann_fidelity(&b, &a).unwrap();
        assert_abs_diff_eq!(f1, f2, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_continuity_in_theta() {
        let s = sc(0.5, 0.1, 1.0);
        let base = output_covariance(&s);
        let mut last = 0.0;
        for (i, d) in [1e-2, 5e-3, 2.5e-3].into_iter().enumerate() {
            let f = uhlmann_fidelity(&base, &output_covariance(&s.with_theta(0.5 + d).unwrap()))
                .unwrap();
            let defect = 1.0 - f;
            if i > 0 {
                // 1 - F scales like delta^2
                let ratio = last / defect;
                assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
            }
            last = defect;
        }
    }

    #[test]
    fn numeric_qfi_matches_closed_form_spot() {
        let s = sc(0.5, 0.01, 1.0);
        let j = qfi_gaussian_numeric_default(&s).unwrap();
        assert!((j - 1.3267489711934156e-2).abs() / 1.3267489711934156e-2 < 1e-6);
        let s2 = sc(0.5, 1.0, 0.0);
        let j2 = qfi_gaussian_numeric_default(&s2).unwrap();
        assert!((j2 - 4.0).abs() < 1e-5);
    }

    #[test]
    fn numeric_qfi_richardson_consistency() {
        let s = sc(0.5, 0.01, 1.0);
        let h = default_fd_step(&s);
        let a = qfi_gaussian_numeric(&s, h).unwrap();
        let b = qfi_gaussian_numeric(&s, h / 2.0).unwrap();
        assert!((a - b).abs() / a.abs() < 1e-5);
    }

    #[test]
    fn numeric_qfi_step_underflow() {
        let s = sc(0.5, 0.01, 1.0);
        match qfi_gaussian_numeric(&s, 1e-9) {
            Err(CoreError::StepUnderflow { .. }) => {}
            other => panic!("expected StepUnderflow, got {other:?}"),
        }
    }
}
