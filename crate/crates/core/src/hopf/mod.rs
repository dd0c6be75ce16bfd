//! Hopf bifurcation normal form for the no-averaging RED system: Taylor
//! expansion, eigenvectors of the linearised operator and its adjoint, the
//! centre-manifold reduction to `g20, g11, g02, g21`, and the resulting
//! first Lyapunov coefficient.

mod eigen;
mod normal_form;
mod taylor;

pub use eigen::{bilinear_form, eigen_data, eigen_residuals, EigenData};
pub use normal_form::{
    classify_hopf, collect_cubic, collect_nonlinearity, collect_quadratic, g_coefficients, Arguments, BifurcationType,
    Collected, Expansion, GCoefficients, NormalFormResult, OrbitStability,
};
pub use taylor::{taylor_coefficients, TaylorCoefficients};

use crate::error::{Error, Result};
use crate::fluid::FluidModel;
use crate::stability::crossover::critical_kappa;
use crate::stability::{crossover_frequency, linear_coefficients, transversality};

/// Intermediate results of a full classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfAnalysis {
    pub taylor: TaylorCoefficients,
    pub eigen: EigenData,
    pub result: NormalFormResult,
}

/// Classifies the Hopf bifurcation met by raising `κ` from the model's
/// parameters, with `κ_c` and `ω0` from the crossover analysis and `α'(0)`
/// from the transversality derivative. The model's own `κ` is ignored.
pub fn analyse_hopf(model: &FluidModel) -> Result<HopfAnalysis> {
    let eq = model.equilibrium()?;
    let taylor = taylor_coefficients(model, &eq)?;
    let c = linear_coefficients(model, &eq)?;
    let (a1, a2, a3) = taylor.char_coefficients();
    for (lin, tay) in [(c.a1, a1), (c.a2, a2), (c.a3, a3)] {
        if (lin - tay).abs() > 1e-10 * lin.abs().max(tay.abs()) {
            return Err(Error::Inconsistent(format!(
                "Taylor linear part gives {tay}, characteristic coefficients give {lin}"
            )));
        }
    }
    let tau = model.net.rtt;
    let kappa_c =
        critical_kappa(&c, tau)?.ok_or_else(|| Error::Precondition("no Hopf point: stable for every κ".into()))?;
    if kappa_c == 0.0 {
        return Err(Error::Precondition("no Hopf point: unstable for every κ".into()));
    }
    let omega0 = crossover_frequency(&c, kappa_c)?
        .omega()
        .ok_or_else(|| Error::Precondition("no crossover frequency".into()))?;
    let alpha_prime = transversality(&c, tau, omega0, kappa_c)?.real_part();
    let eigen = eigen_data(&taylor, tau, kappa_c, omega0)?;
    let g = g_coefficients(&taylor, &eigen)?;
    let result = classify_hopf(&g, omega0, kappa_c, alpha_prime)?;
    Ok(HopfAnalysis { taylor, eigen, result })
}
