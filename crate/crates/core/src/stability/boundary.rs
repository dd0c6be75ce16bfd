use num_complex::Complex64;

use crate::equilibrium::bisect;
use crate::error::{Error, Result};
use crate::fluid::FluidModel;
use crate::protocol::ProtocolSpec;
use crate::stability::crossover::phase_residual;
use crate::stability::roots::char_residual;
use crate::stability::transversality::transversality;
use crate::stability::{linear_coefficients, CharCoefficients};

/// A model parameter that can be swept or solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FreeParameter {
    /// Per-flow capacity C̃.
    C,
    Tau,
    Gamma,
    Alpha,
    K,
    Beta,
    BMin,
    BMax,
    PMax,
    QTh,
    Kappa,
}

impl FreeParameter {
    pub const ALL: [FreeParameter; 11] = [
        FreeParameter::C,
        FreeParameter::Tau,
        FreeParameter::Gamma,
        FreeParameter::Alpha,
        FreeParameter::K,
        FreeParameter::Beta,
        FreeParameter::BMin,
        FreeParameter::BMax,
        FreeParameter::PMax,
        FreeParameter::QTh,
        FreeParameter::Kappa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FreeParameter::C => "c",
            FreeParameter::Tau => "tau",
            FreeParameter::Gamma => "gamma",
            FreeParameter::Alpha => "alpha",
            FreeParameter::K => "k",
            FreeParameter::Beta => "beta",
            FreeParameter::BMin => "bmin",
            FreeParameter::BMax => "bmax",
            FreeParameter::PMax => "pmax",
            FreeParameter::QTh => "qth",
            FreeParameter::Kappa => "kappa",
        }
    }

    pub fn get(self, model: &FluidModel) -> Result<f64> {
        Ok(match self {
            FreeParameter::C => model.net.c_per_flow,
            FreeParameter::Tau => model.net.rtt,
            FreeParameter::Gamma => model.red.gamma,
            FreeParameter::BMin => model.red.b_min,
            FreeParameter::BMax => model.red.b_max,
            FreeParameter::PMax => model.red.p_max,
            FreeParameter::QTh => model.threshold.q_th,
            FreeParameter::Kappa => model.net.kappa,
            FreeParameter::Alpha | FreeParameter::K | FreeParameter::Beta => {
                let cp = compound_params(&model.protocol, self)?;
                match self {
                    FreeParameter::Alpha => cp.alpha,
                    FreeParameter::K => cp.k,
                    _ => cp.beta,
                }
            }
        })
    }

    pub fn set(self, model: &mut FluidModel, value: f64) -> Result<()> {
        match self {
            FreeParameter::C => model.net.c_per_flow = value,
            FreeParameter::Tau => model.net.rtt = value,
            FreeParameter::Gamma => model.red.gamma = value,
            FreeParameter::BMin => model.red.b_min = value,
            FreeParameter::BMax => model.red.b_max = value,
            FreeParameter::PMax => model.red.p_max = value,
            FreeParameter::QTh => model.threshold.q_th = value,
            FreeParameter::Kappa => model.net.kappa = value,
            FreeParameter::Alpha | FreeParameter::K | FreeParameter::Beta => {
                let mut cp = compound_params(&model.protocol, self)?;
                match self {
                    FreeParameter::Alpha => cp.alpha = value,
                    FreeParameter::K => cp.k = value,
                    _ => cp.beta = value,
                }
                model.protocol = ProtocolSpec::Compound(cp);
            }
        }
        Ok(())
    }
}

fn compound_params(spec: &ProtocolSpec, param: FreeParameter) -> Result<crate::protocol::CompoundParams> {
    match spec {
        ProtocolSpec::Compound(cp) => Ok(*cp),
        _ => Err(Error::InvalidParameter(format!(
            "parameter '{}' only applies to Compound TCP",
            param.name()
        ))),
    }
}

impl std::str::FromStr for FreeParameter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        FreeParameter::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = FreeParameter::ALL.iter().map(|p| p.name()).collect();
                format!("unknown parameter '{s}' (expected one of {})", names.join(", "))
            })
    }
}

impl std::fmt::Display for FreeParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A point on the stability boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfPoint {
    pub free_parameter: FreeParameter,
    pub critical_value: f64,
    /// Crossover frequency, rad/s.
    pub omega: f64,
    /// The model's `κ`, which is critical at this point.
    pub kappa_c: f64,
    /// `|F(jω)|` of the characteristic function.
    pub residual: f64,
    /// `Re(dλ/dκ)` at the crossing.
    pub transversality: f64,
    /// Phase residual `ωτ - θ` at the returned value.
    pub phase_residual: f64,
    pub coefficients: CharCoefficients,
}

/// Phase residual `ωτ - θ` for the model as parameterised; negative on the
/// stable side. Delay-independent stability maps to `-∞`.
pub fn model_phase_residual(model: &FluidModel) -> Result<f64> {
    let eq = model.equilibrium()?;
    let c = linear_coefficients(model, &eq)?;
    Ok(match phase_residual(&c, model.net.rtt, model.net.kappa)? {
        Some((_, phi)) => phi,
        None => f64::NEG_INFINITY,
    })
}

fn residual_at(base: &FluidModel, param: FreeParameter, v: f64) -> Result<f64> {
    let mut m = *base;
    param.set(&mut m, v)?;
    model_phase_residual(&m)
}

/// Bisects the phase residual in `param` over `[lo, hi]`, recomputing the
/// equilibrium at every trial value.
pub fn solve_hopf_boundary(base: &FluidModel, param: FreeParameter, lo: f64, hi: f64) -> Result<HopfPoint> {
    let r_lo = residual_at(base, param, lo)?;
    let r_hi = residual_at(base, param, hi)?;
    if r_lo.signum() == r_hi.signum() || r_lo.is_nan() || r_hi.is_nan() {
        return Err(Error::Bracket { lo, hi });
    }
    let value = bisect(lo, hi, |v| residual_at(base, param, v))?;
    hopf_point_at(base, param, value)
}

/// Scans `n` log-spaced values of `param` in `[lo, hi]` for the first change
/// of stability and refines it.
pub fn find_hopf_boundary(base: &FluidModel, param: FreeParameter, lo: f64, hi: f64, n: usize) -> Result<HopfPoint> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "bad scan range [{lo}, {hi}] with {n} points"
        )));
    }
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..n {
        let v = if j == n - 1 { hi } else { lo * ratio.powi(j as i32) };
        let r = match residual_at(base, param, v) {
            Ok(r) => r,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if let Some((pv, pr)) = prev {
            if pr.signum() != r.signum() && !pr.is_nan() && !r.is_nan() {
                return solve_hopf_boundary(base, param, pv, v);
            }
        }
        prev = Some((v, r));
    }
    Err(Error::Bracket { lo, hi })
}

fn hopf_point_at(base: &FluidModel, param: FreeParameter, value: f64) -> Result<HopfPoint> {
    let mut m = *base;
    param.set(&mut m, value)?;
    let eq = m.equilibrium()?;
    let c = linear_coefficients(&m, &eq)?;
    let tau = m.net.rtt;
    let kappa = m.net.kappa;
    let (omega, phi) =
        phase_residual(&c, tau, kappa)?.ok_or_else(|| Error::Convergence("boundary point has no crossover".into()))?;
    // A jump of the principal branch also changes sign; reject it.
    if phi.abs() > 1e-9 {
        return Err(Error::Convergence(format!(
            "phase residual {phi} at {param} = {value}: sign change is a branch jump, not a crossing"
        )));
    }
    let residual = char_residual(&c, Complex64::new(0.0, omega), tau, kappa).norm();
    let tr = transversality(&c, tau, omega, kappa)?;
    Ok(HopfPoint {
        free_parameter: param,
        critical_value: value,
        omega,
        kappa_c: kappa,
        residual,
        transversality: tr.real_part(),
        phase_residual: phi,
        coefficients: c,
    })
}
