use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::Result;
use crate::fluid::{integrate, oscillation_metrics, FluidModel, History, IntegrationOptions, OscillationMetrics};
use crate::stability::FreeParameter;

/// How each point of a bifurcation diagram is simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramOptions {
    /// Constant history at `(1 + perturbation)` times the equilibrium.
    pub perturbation: f64,
    /// Run length, in delays.
    pub horizon_delays: f64,
    /// Statistics are taken after this many delays.
    pub transient_delays: f64,
    pub steps_per_delay: usize,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions {
            perturbation: 0.1,
            horizon_delays: 1000.0,
            transient_delays: 900.0,
            steps_per_delay: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramPoint {
    pub value: f64,
    pub w_star: f64,
    pub metrics: std::result::Result<OscillationMetrics, crate::error::Error>,
}

/// Post-transient window extremes as `param` runs over `values`. Points are
/// independent and computed in parallel; output keeps the input order.
pub fn bifurcation_diagram(
    base: &FluidModel,
    param: FreeParameter,
    values: &[f64],
    opts: DiagramOptions,
) -> Vec<DiagramPoint> {
    values
        .par_iter()
        .map(|&value| {
            let run = || -> Result<(f64, OscillationMetrics)> {
                let mut m = *base;
                param.set(&mut m, value)?;
                m.validate()?;
                let eq = m.equilibrium()?;
                let start: Vec<f64> = m
                    .equilibrium_state(&eq)
                    .iter()
                    .map(|v| v * (1.0 + opts.perturbation))
                    .collect();
                let tau = m.net.rtt;
                let traj = integrate(
                    &m,
                    &History::constant(start),
                    opts.horizon_delays * tau,
                    IntegrationOptions {
                        steps_per_delay: opts.steps_per_delay,
                        record_every: 1,
                    },
                )?;
                Ok((eq.w_star, oscillation_metrics(&traj, opts.transient_delays * tau)?))
            };
            match run() {
                Ok((w_star, metrics)) => DiagramPoint {
                    value,
                    w_star,
                    metrics: Ok(metrics),
                },
                Err(e) => DiagramPoint {
                    value,
                    w_star: f64::NAN,
                    metrics: Err(e),
                },
            }
        })
        .collect()
}

/// CSV with columns `param,value,w_star,w_min,w_max,amplitude,period`;
/// failed points and non-oscillating periods are `NaN`.
pub fn diagram_csv(param: FreeParameter, points: &[DiagramPoint]) -> String {
    let mut out = String::from("param,value,w_star,w_min,w_max,amplitude,period\n");
    for p in points {
        let (lo, hi, amp, period) = match &p.metrics {
            Ok(m) => (m.min, m.max, m.amplitude, m.period.unwrap_or(f64::NAN)),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            out,
            "{param},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            p.value, p.w_star, lo, hi, amp, period
        );
    }
    out
}
