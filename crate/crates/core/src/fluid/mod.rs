//! Closed-loop fluid models: window dynamics coupled to a RED queue (with or
//! without averaging) or to a threshold drop law.

mod diagram;
mod integrate;
mod metrics;

pub use diagram::{bifurcation_diagram, diagram_csv, DiagramOptions, DiagramPoint};
pub use integrate::{integrate, integrate_dde, DelayedSystem, History, IntegrationOptions, Trajectory};
pub use metrics::{oscillation_metrics, windowed_amplitudes, OscillationMetrics};

use crate::equilibrium::{equilibrium_no_averaging, equilibrium_threshold, equilibrium_with_averaging, Equilibrium};
use crate::error::Result;
use crate::protocol::{
    decrease_rate, increase_rate, red_drop_probability, threshold_drop_probability, NetworkParams, ProtocolSpec,
    RedParams, ThresholdParams,
};

/// Windows below this are treated as this value when evaluating `i(w)`,
/// which diverges at zero for sub-linear increase laws.
pub const WINDOW_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FluidSystemKind {
    /// State `(w, q, p)`; `p` follows the averaged queue through the RED slope.
    WithAveraging,
    /// State `(w, q)`; drops computed from the instantaneous queue.
    NoAveraging,
    /// State `(w)`; drops follow `(w / C̃τ)^q_th`.
    Threshold,
}

impl FluidSystemKind {
    pub fn dim(self) -> usize {
        match self {
            FluidSystemKind::WithAveraging => 3,
            FluidSystemKind::NoAveraging => 2,
            FluidSystemKind::Threshold => 1,
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            FluidSystemKind::WithAveraging => &["w", "q", "p"],
            FluidSystemKind::NoAveraging => &["w", "q"],
            FluidSystemKind::Threshold => &["w"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FluidSystemKind::WithAveraging => "with-averaging",
            FluidSystemKind::NoAveraging => "no-averaging",
            FluidSystemKind::Threshold => "threshold",
        }
    }
}

impl std::str::FromStr for FluidSystemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "with-averaging" => Ok(FluidSystemKind::WithAveraging),
            "no-averaging" => Ok(FluidSystemKind::NoAveraging),
            "threshold" => Ok(FluidSystemKind::Threshold),
            other => Err(format!(
                "unknown system '{other}' (expected with-averaging, no-averaging or threshold)"
            )),
        }
    }
}

/// One fully parameterised fluid system. Both queue-policy parameter sets are
/// carried; only the one matching `kind` is read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidModel {
    pub kind: FluidSystemKind,
    pub protocol: ProtocolSpec,
    pub red: RedParams,
    pub threshold: ThresholdParams,
    pub net: NetworkParams,
}

impl FluidModel {
    pub fn new(kind: FluidSystemKind, protocol: ProtocolSpec, net: NetworkParams) -> Self {
        FluidModel {
            kind,
            protocol,
            red: RedParams::default(),
            threshold: ThresholdParams { q_th: 39.0 },
            net,
        }
    }

    pub fn with_red(mut self, red: RedParams) -> Self {
        self.red = red;
        self
    }

    pub fn with_threshold(mut self, th: ThresholdParams) -> Self {
        self.threshold = th;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.net.validate()?;
        match self.kind {
            FluidSystemKind::Threshold => self.threshold.validate(),
            _ => self.red.validate(),
        }
    }

    pub fn equilibrium(&self) -> Result<Equilibrium> {
        match self.kind {
            FluidSystemKind::WithAveraging => equilibrium_with_averaging(&self.protocol, &self.red, &self.net),
            FluidSystemKind::NoAveraging => equilibrium_no_averaging(&self.protocol, &self.red, &self.net),
            FluidSystemKind::Threshold => equilibrium_threshold(&self.protocol, &self.net, &self.threshold),
        }
    }

    /// Equilibrium as a state vector in this system's layout.
    pub fn equilibrium_state(&self, eq: &Equilibrium) -> Vec<f64> {
        match self.kind {
            FluidSystemKind::WithAveraging => vec![eq.w_star, eq.q_star.unwrap_or(0.0), eq.p_star],
            FluidSystemKind::NoAveraging => vec![eq.w_star, eq.q_star.unwrap_or(0.0)],
            FluidSystemKind::Threshold => vec![eq.w_star],
        }
    }

    /// Drop probability seen by the sources for a given state.
    pub fn drop_probability(&self, state: &[f64]) -> f64 {
        match self.kind {
            // The third state is ρ(avg − b_min); map it back to the average
            // queue so the full piecewise law applies outside the band.
            FluidSystemKind::WithAveraging => {
                red_drop_probability(state[2] / self.red.rho() + self.red.b_min, &self.red)
            }
            FluidSystemKind::NoAveraging => red_drop_probability(state[1].max(0.0), &self.red),
            FluidSystemKind::Threshold => threshold_drop_probability(state[0], &self.net, &self.threshold),
        }
    }

    fn window_derivative(&self, w: f64, w_delayed: f64, p_delayed: f64) -> f64 {
        let w = w.max(WINDOW_FLOOR);
        let w_delayed = w_delayed.max(0.0);
        // Both rate laws are total on w > 0; the floor keeps us there.
        let i = increase_rate(&self.protocol, w, 0).unwrap_or(0.0);
        let d = decrease_rate(&self.protocol, w, 0).unwrap_or(0.0);
        self.net.kappa * (i * (1.0 - p_delayed) - d * p_delayed) * w_delayed / self.net.rtt
    }

    fn queue_derivative(&self, q: f64, w: f64, p: f64) -> f64 {
        let dq = self.net.kappa * ((1.0 - p) * w.max(0.0) / self.net.rtt - self.net.c_per_flow);
        if q <= 0.0 {
            dq.max(0.0)
        } else if self.net.buffer.is_some_and(|b| q >= b) {
            dq.min(0.0)
        } else {
            dq
        }
    }

    /// Right-hand side given the current and the one-delay-ago state.
    pub fn rhs_into(&self, now: &[f64], delayed: &[f64], out: &mut [f64]) {
        let p_delayed = self.drop_probability(delayed);
        out[0] = self.window_derivative(now[0], delayed[0], p_delayed);
        match self.kind {
            FluidSystemKind::WithAveraging => {
                let p_now = self.drop_probability(now);
                out[1] = self.queue_derivative(now[1], now[0], p_now);
                let g = self.net.kappa * self.red.gamma * self.net.c_per_flow;
                out[2] = -g * (now[2] + self.red.rho() * self.red.b_min - self.red.rho() * now[1]);
            }
            FluidSystemKind::NoAveraging => {
                let p_now = self.drop_probability(now);
                out[1] = self.queue_derivative(now[1], now[0], p_now);
            }
            FluidSystemKind::Threshold => {}
        }
    }
}

/// Right-hand side of the fluid system; see [`FluidModel::rhs_into`].
pub fn rhs(model: &FluidModel, now: &[f64], delayed: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.kind.dim()];
    model.rhs_into(now, delayed, &mut out);
    out
}

impl DelayedSystem for FluidModel {
    fn dim(&self) -> usize {
        self.kind.dim()
    }

    fn delay(&self) -> f64 {
        self.net.rtt
    }

    fn rhs(&self, now: &[f64], delayed: &[f64], out: &mut [f64]) {
        self.rhs_into(now, delayed, out)
    }

    fn project(&self, state: &mut [f64]) {
        state[0] = state[0].max(WINDOW_FLOOR);
        if self.kind != FluidSystemKind::Threshold {
            let mut q = state[1].max(0.0);
            if let Some(b) = self.net.buffer {
                q = q.min(b);
            }
            state[1] = q;
        }
    }

    fn labels(&self) -> Vec<String> {
        self.kind.labels().iter().map(|s| s.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: FluidSystemKind, rtt: f64) -> FluidModel {
        FluidModel::new(kind, ProtocolSpec::default(), NetworkParams::new(100.0, rtt))
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        for (kind, rtt) in [
            (FluidSystemKind::WithAveraging, 0.0848),
            (FluidSystemKind::NoAveraging, 0.273),
            (FluidSystemKind::Threshold, 1.0),
        ] {
            let m = model(kind, rtt);
            let x = m.equilibrium_state(&m.equilibrium().unwrap());
            let f = rhs(&m, &x, &x);
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < 1e-10, "{kind:?}: {f:?}");
        }
    }

    #[test]
    fn empty_queue_does_not_drain() {
        let m = model(FluidSystemKind::WithAveraging, 0.1);
        // Arrival rate w/τ = 50 < C̃ = 100.
        let x = [5.0, 0.0, 0.0];
        let f = rhs(&m, &x, &x);
        assert_eq!(f[1], 0.0);
        let m = model(FluidSystemKind::NoAveraging, 0.1);
        let f = rhs(&m, &x[..2], &x[..2]);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn full_buffer_does_not_overflow() {
        let mut m = model(FluidSystemKind::NoAveraging, 0.1);
        m.net.buffer = Some(100.0);
        let x = [50.0, 100.0];
        assert_eq!(rhs(&m, &x, &x)[1], 0.0);
    }

    #[test]
    fn kappa_scales_rhs() {
        for kind in [
            FluidSystemKind::WithAveraging,
            FluidSystemKind::NoAveraging,
            FluidSystemKind::Threshold,
        ] {
            let m1 = model(kind, 0.2);
            let mut m2 = m1;
            m2.net.kappa = 2.0;
            let now = [12.0, 80.0, 0.004][..kind.dim()].to_vec();
            let del = [15.0, 60.0, 0.002][..kind.dim()].to_vec();
            let f1 = rhs(&m1, &now, &del);
            let f2 = rhs(&m2, &now, &del);
            for (a, b) in f1.iter().zip(&f2) {
                assert_eq!(2.0 * a, *b);
            }
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("threshold".parse::<FluidSystemKind>(), Ok(FluidSystemKind::Threshold));
        assert!("avg".parse::<FluidSystemKind>().is_err());
    }
}
