use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fluid::FluidSystemKind;
use crate::stability::roots::{char_dkappa, char_dlambda, char_residual};
use crate::stability::CharCoefficients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transversality {
    /// `dλ/dκ` at the crossing root `jω`.
    pub dlambda_dkappa: Complex64,
    /// With averaging: `Re(N)Re(D) + Im(N)Im(D)` for `dλ/dκ = N/D`, whose
    /// sign equals that of `Re(dλ/dκ)`.
    pub sign_expression: Option<f64>,
}

impl Transversality {
    /// `Re(dλ/dκ)`, also `α'(0)` in the normal form.
    pub fn real_part(&self) -> f64 {
        self.dlambda_dkappa.re
    }

    /// Roots cross from left to right as `κ` increases.
    pub fn is_positive(&self) -> bool {
        self.dlambda_dkappa.re > 0.0
    }
}

/// Implicit derivative `dλ/dκ = -F_κ / F_λ` at `λ = jω`, `κ = kappa_c`.
pub fn transversality(c: &CharCoefficients, tau: f64, omega: f64, kappa_c: f64) -> Result<Transversality> {
    let lambda = Complex64::new(0.0, omega);
    let residual = char_residual(c, lambda, tau, kappa_c).norm();
    let scale = omega.powi(match c.kind {
        FluidSystemKind::WithAveraging => 3,
        FluidSystemKind::NoAveraging => 2,
        FluidSystemKind::Threshold => 1,
    });
    if residual > 1e-6 * scale.max(1.0) {
        return Err(Error::Precondition(format!(
            "jω = {omega}j is not a characteristic root (residual {residual})"
        )));
    }
    let num = -char_dkappa(c, lambda, tau, kappa_c);
    let den = char_dlambda(c, lambda, tau, kappa_c);
    if den.norm() < 1e-12 {
        return Err(Error::Degenerate("repeated characteristic root at the crossing".into()));
    }
    let sign_expression = (c.kind == FluidSystemKind::WithAveraging).then(|| num.re * den.re + num.im * den.im);
    Ok(Transversality {
        dlambda_dkappa: num / den,
        sign_expression,
    })
}
