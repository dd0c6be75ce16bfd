use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::fluid::{FluidModel, FluidSystemKind};
use crate::protocol::{decrease_rate, increase_rate, threshold_drop_slope};

/// Coefficients of the characteristic quasi-polynomial
///
/// * with averaging: `λ³ + κa1 λ² + κ²a2 λ + κ³a3 + κ³a4 e^{-λτ}`
/// * no averaging:   `λ² + κa1 λ + κ²a2 + κ²a3 e^{-λτ}`
/// * threshold:      `λ + κa1 + κa2 e^{-λτ}`
///
/// Coefficients a system does not have are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCoefficients {
    pub kind: FluidSystemKind,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl CharCoefficients {
    /// The coefficients this system actually has, `a1` first.
    pub fn values(&self) -> Vec<f64> {
        let all = [self.a1, self.a2, self.a3, self.a4];
        let n = match self.kind {
            FluidSystemKind::WithAveraging => 4,
            FluidSystemKind::NoAveraging => 3,
            FluidSystemKind::Threshold => 2,
        };
        all[..n].to_vec()
    }
}

/// Relative agreement required between the general and simplified forms.
const FORM_TOLERANCE: f64 = 1e-10;

/// Linearisation coefficients in terms of `i, i', d, d'` at the equilibrium.
pub fn raw_coefficients(model: &FluidModel, eq: &Equilibrium) -> Result<CharCoefficients> {
    let (w, p) = (eq.w_star, eq.p_star);
    let tau = model.net.rtt;
    let i = increase_rate(&model.protocol, w, 0)?;
    let di = increase_rate(&model.protocol, w, 1)?;
    let d = decrease_rate(&model.protocol, w, 0)?;
    let dd = decrease_rate(&model.protocol, w, 1)?;
    // Sensitivity of the window balance to the window, negated.
    let slope = di * (1.0 - p) - dd * p;
    let wt = w / tau;
    let kind = model.kind;
    let c = match kind {
        FluidSystemKind::WithAveraging => {
            let g = model.red.gamma * model.net.c_per_flow;
            let rho = model.red.rho();
            CharCoefficients {
                kind,
                a1: g - slope * wt,
                a2: g * (rho - slope) * wt,
                a3: -rho * g * slope * wt * wt,
                a4: rho * g * (i + d) * (1.0 - p) * w / (tau * tau),
            }
        }
        FluidSystemKind::NoAveraging => {
            let rho = model.red.rho();
            CharCoefficients {
                kind,
                a1: (rho - slope) * wt,
                a2: -rho * slope * wt * wt,
                a3: rho * (i + d) * (1.0 - p) * w / (tau * tau),
                a4: 0.0,
            }
        }
        FluidSystemKind::Threshold => {
            let dp = threshold_drop_slope(w, &model.net, &model.threshold);
            CharCoefficients {
                kind,
                a1: -slope * wt,
                a2: dp * (i + d) * wt,
                a3: 0.0,
                a4: 0.0,
            }
        }
    };
    Ok(c)
}

/// Coefficients after substituting `i = αw^(k-1)`, `d = βw` and the
/// equilibrium relations. `None` for protocols without a Compound form.
pub fn compound_coefficients(model: &FluidModel, eq: &Equilibrium) -> Option<CharCoefficients> {
    let cp = model.protocol.compound_form()?;
    let (w, p) = (eq.w_star, eq.p_star);
    let tau = model.net.rtt;
    let c_t = model.net.c_per_flow;
    let i = cp.alpha * w.powf(cp.k - 1.0);
    let two_k = 2.0 - cp.k;
    let kind = model.kind;
    Some(match kind {
        FluidSystemKind::WithAveraging => {
            let g = model.red.gamma * c_t;
            let rho = model.red.rho();
            CharCoefficients {
                kind,
                a1: g + two_k * i * (1.0 - p) / tau,
                a2: g * (rho * w + two_k * i * (1.0 - p)) / tau,
                a3: rho * g * c_t * two_k * i / tau,
                a4: rho * g * c_t * i / (p * tau),
            }
        }
        FluidSystemKind::NoAveraging => {
            let rho = model.red.rho();
            let wt = w / tau;
            CharCoefficients {
                kind,
                a1: wt * (rho + two_k * cp.beta * p),
                a2: rho * two_k * cp.beta * p * wt * wt,
                a3: rho * cp.beta * wt * wt,
                a4: 0.0,
            }
        }
        FluidSystemKind::Threshold => CharCoefficients {
            kind,
            a1: two_k * i * (1.0 - p) / tau,
            a2: model.threshold.q_th * i / tau,
            a3: 0.0,
            a4: 0.0,
        },
    })
}

/// Linearisation coefficients. For Compound-form protocols the general and
/// simplified expressions are both evaluated and must agree.
pub fn linear_coefficients(model: &FluidModel, eq: &Equilibrium) -> Result<CharCoefficients> {
    let raw = raw_coefficients(model, eq)?;
    if let Some(simple) = compound_coefficients(model, eq) {
        for (k, (a, b)) in raw.values().iter().zip(simple.values()).enumerate() {
            let scale = a.abs().max(b.abs());
            if (a - b).abs() > FORM_TOLERANCE * scale {
                return Err(Error::Inconsistent(format!(
                    "coefficient a{} differs between general ({a}) and simplified ({b}) forms",
                    k + 1
                )));
            }
        }
    }
    if let Some((k, v)) = raw.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Inconsistent(format!(
            "coefficient a{} = {v} is not positive",
            k + 1
        )));
    }
    Ok(raw)
}
