use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hopf::TaylorCoefficients;

const DEGENERATE: f64 = 1e-12;
const QUADRATURE_INTERVALS: usize = 2000;

/// Eigenvector `q(θ) = (1, φ1) e^{iω0θ}` of the linearised operator for the
/// eigenvalue `iω0`, and the adjoint eigenvector `q*(s) = B (φ2, 1) e^{iω0 s}`
/// normalised so that `⟨q*, q⟩ = 1`. Both may carry a common unit phase
/// factor `rotation`, which leaves the normalisation intact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    pub omega0: f64,
    pub kappa: f64,
    pub tau: f64,
    pub phi1: Complex64,
    pub phi2: Complex64,
    pub b: Complex64,
    pub rotation: Complex64,
}

impl EigenData {
    pub fn q(&self, theta: f64) -> [Complex64; 2] {
        let e = self.rotation * Complex64::new(0.0, self.omega0 * theta).exp();
        [e, self.phi1 * e]
    }

    pub fn q_adjoint(&self, s: f64) -> [Complex64; 2] {
        let e = self.rotation * self.b * Complex64::new(0.0, self.omega0 * s).exp();
        [self.phi2 * e, e]
    }

    /// The same eigenpair with both vectors multiplied by `e^{i angle}`.
    pub fn rotated(&self, angle: f64) -> Self {
        EigenData {
            rotation: self.rotation * Complex64::from_polar(1.0, angle),
            ..*self
        }
    }
}

pub fn eigen_data(t: &TaylorCoefficients, tau: f64, kappa: f64, omega0: f64) -> Result<EigenData> {
    let i = Complex64::i();
    let den1 = i * omega0 - kappa * t.chi_y;
    let den2 = kappa * t.xi_x + i * omega0;
    if den1.norm() < DEGENERATE || den2.norm() < DEGENERATE {
        return Err(Error::Degenerate("eigenvector denominator vanishes".into()));
    }
    let phi1 = kappa * t.chi_x / den1;
    let phi2 = -kappa * t.chi_x / den2;
    let e = (i * omega0 * tau).exp();
    let norm = phi2 * (1.0 + kappa * phi1.conj() * tau * t.xi_s * e) + phi1.conj();
    if norm.norm() < DEGENERATE {
        return Err(Error::Degenerate("adjoint normaliser vanishes".into()));
    }
    Ok(EigenData {
        omega0,
        kappa,
        tau,
        phi1,
        phi2,
        b: 1.0 / norm,
        rotation: Complex64::new(1.0, 0.0),
    })
}

/// `⟨ψ, φ⟩ = ψ̄(0)ᵀφ(0) + ∫_{-τ}^0 ψ̄1(ζ+τ) κ ξs φ2(ζ) dζ`, the integral by
/// composite Simpson quadrature.
pub fn bilinear_form(
    t: &TaylorCoefficients,
    kappa: f64,
    tau: f64,
    psi: impl Fn(f64) -> [Complex64; 2],
    phi: impl Fn(f64) -> [Complex64; 2],
) -> Complex64 {
    let (p0, f0) = (psi(0.0), phi(0.0));
    let point = p0[0].conj() * f0[0] + p0[1].conj() * f0[1];
    let n = QUADRATURE_INTERVALS;
    let h = tau / n as f64;
    let integrand = |zeta: f64| psi(zeta + tau)[0].conj() * phi(zeta)[1];
    let mut sum = integrand(-tau) + integrand(0.0);
    for j in 1..n {
        let weight = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * integrand(-tau + j as f64 * h);
    }
    point + kappa * t.xi_s * sum * h / 3.0
}

/// Largest component of `L q - iω0 q(0)` and of `L* q* + iω0 q*(0)`, with the
/// linear operators applied directly.
pub fn eigen_residuals(t: &TaylorCoefficients, e: &EigenData) -> (f64, f64) {
    let (k, i) = (e.kappa, Complex64::i());
    let iw = i * e.omega0;
    let q0 = e.q(0.0);
    let qd = e.q(-e.tau);
    let r1 = k * (t.xi_x * q0[0] + t.xi_s * qd[1]) - iw * q0[0];
    let r2 = k * (t.chi_x * q0[0] + t.chi_y * q0[1]) - iw * q0[1];
    let a0 = e.q_adjoint(0.0);
    let ad = e.q_adjoint(e.tau);
    let s1 = k * (t.xi_x * a0[0] + t.chi_x * a0[1]) + iw * a0[0];
    let s2 = k * (t.chi_y * a0[1] + t.xi_s * ad[0]) + iw * a0[1];
    (r1.norm().max(r2.norm()), s1.norm().max(s2.norm()))
}
