use std::f64::consts::{FRAC_PI_2, PI};

use crate::equilibrium::{bisect, Equilibrium};
use crate::error::{Error, Result};
use crate::fluid::{FluidModel, FluidSystemKind};
use crate::stability::crossover::{critical_kappa, crossover_frequency, Crossover};
use crate::stability::roots::cubic_roots;
use crate::stability::{linear_coefficients, CharCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityCondition {
    /// `|L(jω_c)| < 1` at the phase crossover of the loop transfer function
    /// (sufficient; RED with averaging).
    NyquistSufficient,
    /// The Nyquist test evaluated at `ω_c τ = π/2` (diagnostic simplification).
    SimplifiedSufficient,
    /// `κ < κ_c`, exact for the RED systems.
    CriticalKappa,
    /// `κτ√(a2² - a1²) < acos(-a1/a2)`, exact for the threshold system.
    ThresholdExact,
    /// `κ a2 τ < π/2` (sufficient; threshold system).
    ThresholdSufficient,
}

/// `margin` is the condition's left side minus its right side, so the
/// verdict is stable exactly when `margin < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub margin: f64,
    pub condition: StabilityCondition,
}

impl StabilityVerdict {
    fn from_margin(margin: f64, condition: StabilityCondition) -> Self {
        StabilityVerdict {
            stable: margin < 0.0,
            margin,
            condition,
        }
    }
}

/// Exact local-stability verdict `κ < κ_c` for either RED system, or the
/// exact threshold condition.
pub fn stability_verdict(model: &FluidModel, eq: &Equilibrium) -> Result<StabilityVerdict> {
    match model.kind {
        FluidSystemKind::Threshold => Ok(stability_threshold(model, eq)?.exact),
        _ => {
            let c = linear_coefficients(model, eq)?;
            critical_kappa_verdict(&c, model.net.rtt, model.net.kappa)
        }
    }
}

pub(crate) fn critical_kappa_verdict(c: &CharCoefficients, tau: f64, kappa: f64) -> Result<StabilityVerdict> {
    let margin = match critical_kappa(c, tau)? {
        Some(kc) if kc > 0.0 => kappa / kc - 1.0,
        Some(_) => f64::INFINITY,
        None => -1.0,
    };
    Ok(StabilityVerdict::from_margin(margin, StabilityCondition::CriticalKappa))
}

/// Exact verdict for RED without averaging.
pub fn stability_no_averaging(model: &FluidModel, eq: &Equilibrium) -> Result<StabilityVerdict> {
    if model.kind != FluidSystemKind::NoAveraging {
        return Err(Error::InvalidParameter("expected the no-averaging system".into()));
    }
    stability_verdict(model, eq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientReport {
    /// Phase-crossover frequency of the loop transfer function.
    pub omega_c: f64,
    pub nyquist: StabilityVerdict,
    pub simplified: StabilityVerdict,
}

/// Nyquist-based sufficient condition for RED with averaging, and its
/// simplification at `ω_c τ = π/2`.
pub fn sufficient_stable_with_averaging(model: &FluidModel, eq: &Equilibrium) -> Result<SufficientReport> {
    if model.kind != FluidSystemKind::WithAveraging {
        return Err(Error::InvalidParameter("expected the with-averaging system".into()));
    }
    let c = linear_coefficients(model, eq)?;
    let k = model.net.kappa;
    let tau = model.net.rtt;
    let (a1, a2, a3, a4) = (k * c.a1, k * k * c.a2, k.powi(3) * c.a3, k.powi(3) * c.a4);

    // Loop transfer L(s) = a4 e^{-sτ} / P(s), P(s) = s³ + a1 s² + a2 s + a3.
    // With all poles of P in the left half plane, ωτ + arg P(jω) is
    // continuous and increasing from 0, so the phase crossover is unique on (0, π/τ).
    let poles = cubic_roots(a1, a2, a3);
    if poles.iter().any(|z| z.re >= 0.0) {
        return Err(Error::Precondition(
            "loop transfer function has open-loop poles in the right half plane; test inconclusive".into(),
        ));
    }
    let phase = |om: f64| om * tau + poles.iter().map(|r| (om - r.im).atan2(-r.re)).sum::<f64>();
    let omega_c = bisect(0.0, PI / tau, |om| Ok(phase(om) - PI))
        .map_err(|_| Error::Precondition("phase crossover not bracketed in (0, π/τ); test inconclusive".into()))?;

    let im_p = a2 * omega_c - omega_c.powi(3);
    let lhs = a4 * (omega_c * tau).sin().abs() / im_p.abs();
    let re_p = a3 - a1 * omega_c * omega_c;
    let gain = a4 / re_p.hypot(im_p);
    if (lhs - gain).abs() > 1e-8 * gain.max(1e-300) {
        return Err(Error::Inconsistent(format!(
            "loop gain {gain} at the phase crossover disagrees with its sine form {lhs}"
        )));
    }

    // Simplified form: evaluate at ω_h = π/(2τ), scaled so the bound reads < π/2.
    let omega_h = FRAC_PI_2 / tau;
    let simplified_lhs = a4 * tau / (a2 - omega_h * omega_h).abs();
    if let (Some(cp), true) = (model.protocol.compound_form(), k == 1.0) {
        let (w, p) = (eq.w_star, eq.p_star);
        let (rho, gamma, c_t) = (model.red.rho(), model.red.gamma, model.net.c_per_flow);
        let printed = rho * gamma * cp.alpha * w.powf(cp.k) * c_t * tau
            / p
            / (gamma * (rho * w * w + (2.0 - cp.k) * cp.beta * w * w * p) - PI * PI / (4.0 * (1.0 - p))).abs();
        if (printed - simplified_lhs).abs() > 1e-9 * simplified_lhs {
            return Err(Error::Inconsistent(format!(
                "simplified condition {simplified_lhs} disagrees with its parameter form {printed}"
            )));
        }
    }

    Ok(SufficientReport {
        omega_c,
        nyquist: StabilityVerdict::from_margin(lhs - 1.0, StabilityCondition::NyquistSufficient),
        simplified: StabilityVerdict::from_margin(simplified_lhs - FRAC_PI_2, StabilityCondition::SimplifiedSufficient),
    })
}

/// Left and right sides of a condition written in protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterForm {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub exact: StabilityVerdict,
    pub sufficient: StabilityVerdict,
    /// `κ α q_th (w*)^(k-1) < π/2`; Compound-form protocols only.
    pub sufficient_parameter_form: Option<ParameterForm>,
    /// `κ α (w*)^(k-1) √(q_th² - ((2-k)(1-p*))²) < acos(-(2-k)(1-p*)/q_th)`,
    /// present when the crossover exists.
    pub exact_parameter_form: Option<ParameterForm>,
}

/// Exact and sufficient stability verdicts for the threshold system.
pub fn stability_threshold(model: &FluidModel, eq: &Equilibrium) -> Result<ThresholdReport> {
    if model.kind != FluidSystemKind::Threshold {
        return Err(Error::InvalidParameter("expected the threshold system".into()));
    }
    let c = linear_coefficients(model, eq)?;
    let k = model.net.kappa;
    let tau = model.net.rtt;
    let exact_margin = match crossover_frequency(&c, k)? {
        Crossover::Frequency(omega) => omega * tau - (-c.a1 / c.a2).acos(),
        // Delay-independent stability.
        Crossover::NoCrossover => -PI,
    };
    let exact = StabilityVerdict::from_margin(exact_margin, StabilityCondition::ThresholdExact);
    let sufficient = StabilityVerdict::from_margin(k * c.a2 * tau - FRAC_PI_2, StabilityCondition::ThresholdSufficient);
    if sufficient.stable && !exact.stable {
        return Err(Error::Inconsistent(
            "sufficient threshold condition holds while the exact one fails".into(),
        ));
    }

    let (sufficient_parameter_form, exact_parameter_form) = match model.protocol.compound_form() {
        Some(cp) => {
            let (w, p, q) = (eq.w_star, eq.p_star, model.threshold.q_th);
            let gain = k * cp.alpha * w.powf(cp.k - 1.0);
            let suff = ParameterForm {
                lhs: gain * q,
                rhs: FRAC_PI_2,
            };
            let damping = (2.0 - cp.k) * (1.0 - p);
            let exact_form = (q > damping).then(|| ParameterForm {
                lhs: gain * (q * q - damping * damping).sqrt(),
                rhs: (-damping / q).acos(),
            });
            (Some(suff), exact_form)
        }
        None => (None, None),
    };

    Ok(ThresholdReport {
        exact,
        sufficient,
        sufficient_parameter_form,
        exact_parameter_form,
    })
}
