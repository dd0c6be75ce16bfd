use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::fluid::{FluidModel, FluidSystemKind};
use crate::protocol::{decrease_rate, increase_rate};

/// Coefficients of the Taylor expansion of the no-averaging system about its
/// equilibrium, with `x = u1(t)`, `r = u1(t-τ)`, `s = u2(t-τ)`, `y = u2(t)`:
///
/// ```text
/// u1' = κ(ξx x + ξs s + ξxx x² + ξxr xr + ξxs xs + ξrs rs
///         + ξxxx x³ + ξxxr x²r + ξxxs x²s + ξxrs xrs)
/// u2' = κ(χx x + χy y + χxy xy)
/// ```
///
/// Each coefficient is the monomial coefficient, i.e. the partial derivative
/// divided by the factorials of repeated variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCoefficients {
    pub xi_x: f64,
    pub xi_s: f64,
    pub xi_xx: f64,
    pub xi_xr: f64,
    pub xi_xs: f64,
    pub xi_rs: f64,
    pub xi_xxx: f64,
    pub xi_xxr: f64,
    pub xi_xxs: f64,
    pub xi_xrs: f64,
    pub chi_x: f64,
    pub chi_y: f64,
    pub chi_xy: f64,
}

impl TaylorCoefficients {
    /// `(a1, a2, a3)` of the characteristic equation implied by the linear part.
    pub fn char_coefficients(&self) -> (f64, f64, f64) {
        (
            -(self.xi_x + self.chi_y),
            self.xi_x * self.chi_y,
            -self.xi_s * self.chi_x,
        )
    }
}

/// Taylor coefficients at the equilibrium of the no-averaging RED system.
/// The drop law is affine in the queue, and the decrease law must be linear
/// in the window (`d'' = 0`), which holds for every variant except Africa.
pub fn taylor_coefficients(model: &FluidModel, eq: &Equilibrium) -> Result<TaylorCoefficients> {
    if model.kind != FluidSystemKind::NoAveraging {
        return Err(Error::InvalidParameter(
            "the normal form is available for the no-averaging system only".into(),
        ));
    }
    if !model.protocol.has_linear_decrease() {
        return Err(Error::InvalidParameter(format!(
            "the normal form needs a decrease law linear in the window; '{}' is not",
            model.protocol.name()
        )));
    }
    let (w, p) = (eq.w_star, eq.p_star);
    let tau = model.net.rtt;
    let spec = &model.protocol;
    let i = increase_rate(spec, w, 0)?;
    let i1 = increase_rate(spec, w, 1)?;
    let i2 = increase_rate(spec, w, 2)?;
    let i3 = increase_rate(spec, w, 3)?;
    let d = decrease_rate(spec, w, 0)?;
    let d1 = decrease_rate(spec, w, 1)?;
    let dp = model.red.rho();
    let slope = i1 * (1.0 - p) - d1 * p;
    Ok(TaylorCoefficients {
        xi_x: slope * w / tau,
        xi_s: -dp * (i + d) * w / tau,
        xi_xx: 0.5 * i2 * (1.0 - p) * w / tau,
        xi_xr: slope / tau,
        xi_xs: -dp * (i1 + d1) * w / tau,
        xi_rs: -dp * (i + d) / tau,
        xi_xxx: i3 * (1.0 - p) * w / (6.0 * tau),
        xi_xxr: 0.5 * i2 * (1.0 - p) / tau,
        xi_xxs: -0.5 * dp * i2 * w / tau,
        // Mixed partial in three distinct variables: no factorial.
        xi_xrs: -dp * (i1 + d1) / tau,
        chi_x: (1.0 - p) / tau,
        chi_y: -dp * w / tau,
        chi_xy: -dp / tau,
    })
}
