//! Fixed-step RK4 for systems with one constant delay, by the method of steps.
//!
//! The step is `h = τ/m`, so the delayed argument at every grid point is a
//! stored grid value. RK4 also needs the delayed state half a step off the
//! grid; that comes from the cubic Hermite interpolant through the two
//! neighbouring grid points and their stored derivatives.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Minimum number of steps per delay interval.
pub const MIN_STEPS_PER_DELAY: usize = 200;

pub trait DelayedSystem {
    fn dim(&self) -> usize;
    fn delay(&self) -> f64;
    /// Writes `dx/dt` given `x(t)` and `x(t - delay)`.
    fn rhs(&self, now: &[f64], delayed: &[f64], out: &mut [f64]);
    /// Maps a state back onto the admissible set after each step.
    fn project(&self, _state: &mut [f64]) {}
    fn labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }
}

/// Initial function on `[-τ, 0]`.
pub enum History {
    Constant(Vec<f64>),
    Function(Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl History {
    pub fn constant(state: Vec<f64>) -> Self {
        History::Constant(state)
    }

    fn at(&self, t: f64) -> Vec<f64> {
        match self {
            History::Constant(x) => x.clone(),
            History::Function(f) => f(t),
        }
    }
}

impl std::fmt::Debug for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            History::Constant(x) => f.debug_tuple("Constant").field(x).finish(),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrationOptions {
    /// `m` in `h = τ/m`.
    pub steps_per_delay: usize,
    /// Keep every n-th grid point in the returned trajectory.
    pub record_every: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            steps_per_delay: 500,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub delay: f64,
    /// Grid step of the integration (sample spacing is `step * record_every`).
    pub step: f64,
    pub times: Vec<f64>,
    /// Row-major, `dim` values per sample.
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.states[n * d..(n + 1) * d]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(i).step_by(self.dim()).copied()
    }

    /// CSV with a `t` column followed by one column per state variable,
    /// 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 20 * (self.dim() + 1));
        out.push('t');
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for n in 0..self.len() {
            let _ = write!(out, "{:.11e}", self.times[n]);
            for v in self.state(n) {
                let _ = write!(out, ",{v:.11e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates `sys` from `t = 0` to `horizon`.
pub fn integrate<S: DelayedSystem + ?Sized>(
    sys: &S,
    history: &History,
    horizon: f64,
    opts: IntegrationOptions,
) -> Result<Trajectory> {
    let dim = sys.dim();
    let tau = sys.delay();
    let m = opts.steps_per_delay;
    if m < MIN_STEPS_PER_DELAY || !(tau > 0.0) {
        return Err(Error::InvalidStep {
            step: tau / m as f64,
            delay: tau,
        });
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    let record_every = opts.record_every.max(1);
    let h = tau / m as f64;
    let n_steps = (horizon / h - 1e-9).ceil().max(0.0) as usize;

    // Ring of the last m grid states and their derivatives; at step n index 0
    // holds t_{n-m}. Before t = 0 the history function is used directly.
    let mut past: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(m + 2);

    let mut x = history.at(0.0);
    if x.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "history has dimension {}, system has {dim}",
            x.len()
        )));
    }
    sys.project(&mut x);

    let mut traj = Trajectory {
        labels: sys.labels(),
        delay: tau,
        step: h,
        times: Vec::with_capacity(n_steps / record_every + 2),
        states: Vec::with_capacity((n_steps / record_every + 2) * dim),
    };
    traj.times.push(0.0);
    traj.states.extend_from_slice(&x);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut mid_delayed = vec![0.0; dim];

    for n in 0..n_steps {
        let t = n as f64 * h;
        // Delayed grid values at t - τ and t + h - τ.
        let (d0, d1): (Vec<f64>, Vec<f64>);
        if n < m {
            d0 = history.at(t - tau);
            // At n = m - 1 the end point is t = 0, already stored (projected).
            d1 = if n + 1 == m {
                past[0].0.clone()
            } else {
                history.at(t + h - tau)
            };
            let dm = history.at(t + 0.5 * h - tau);
            mid_delayed.copy_from_slice(&dm);
        } else {
            let (y0, f0) = &past[0];
            let (y1, f1) = &past[1];
            for i in 0..dim {
                mid_delayed[i] = 0.5 * (y0[i] + y1[i]) + h * (f0[i] - f1[i]) / 8.0;
            }
            d0 = y0.clone();
            d1 = y1.clone();
        }

        sys.rhs(&x, &d0, &mut k1);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        sys.rhs(&tmp, &mid_delayed, &mut k2);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        sys.rhs(&tmp, &mid_delayed, &mut k3);
        for i in 0..dim {
            tmp[i] = x[i] + h * k3[i];
        }
        sys.rhs(&tmp, &d1, &mut k4);

        // Store (x_n, f_n) before advancing; f_n is the solution's slope at t_n.
        past.push_back((x.clone(), k1.clone()));
        if past.len() > m {
            past.pop_front();
        }

        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        sys.project(&mut x);
        let t_next = (n + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { time: t_next });
        }
        if (n + 1) % record_every == 0 || n + 1 == n_steps {
            traj.times.push(t_next);
            traj.states.extend_from_slice(&x);
        }
    }
    Ok(traj)
}

/// Integrates with an explicit step, which must split the delay into an
/// integer number `m >= 200` of equal steps.
pub fn integrate_dde<S: DelayedSystem + ?Sized>(
    sys: &S,
    history: &History,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    let tau = sys.delay();
    let ratio = tau / step;
    let m = ratio.round();
    if !(step > 0.0) || (ratio - m).abs() > 1e-9 * ratio || m < MIN_STEPS_PER_DELAY as f64 {
        return Err(Error::InvalidStep { step, delay: tau });
    }
    integrate(
        sys,
        history,
        horizon,
        IntegrationOptions {
            steps_per_delay: m as usize,
            record_every: 1,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x' = -a x(t - τ): the first delay interval has a polynomial solution.
    struct LinearDelay {
        a: f64,
        tau: f64,
    }

    impl DelayedSystem for LinearDelay {
        fn dim(&self) -> usize {
            1
        }
        fn delay(&self) -> f64 {
            self.tau
        }
        fn rhs(&self, _now: &[f64], delayed: &[f64], out: &mut [f64]) {
            out[0] = -self.a * delayed[0];
        }
    }

    #[test]
    fn method_of_steps_matches_exact_polynomial() {
        // With x ≡ 1 on [-1, 0]: x = 1 - t on [0, 1], x = 1 - t + (t-1)²/2 on [1, 2].
        let sys = LinearDelay { a: 1.0, tau: 1.0 };
        let traj = integrate(&sys, &History::constant(vec![1.0]), 2.0, IntegrationOptions::default()).unwrap();
        for (n, &t) in traj.times.iter().enumerate() {
            let exact = if t <= 1.0 {
                1.0 - t
            } else {
                1.0 - t + 0.5 * (t - 1.0) * (t - 1.0)
            };
            assert!((traj.state(n)[0] - exact).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn cubic_segment_is_exact() {
        // On [2, 3] the delayed input is quadratic: the Hermite midpoint and
        // RK4's Simpson weights are both exact there.
        let sys = LinearDelay { a: 1.0, tau: 1.0 };
        let traj = integrate(&sys, &History::constant(vec![1.0]), 3.0, IntegrationOptions::default()).unwrap();
        let t = 3.0;
        let exact = 1.0 - t + 0.5 * (t - 1.0f64).powi(2) - (t - 2.0f64).powi(3) / 6.0;
        assert!((traj.last()[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn function_history_is_used() {
        let sys = LinearDelay { a: 1.0, tau: 1.0 };
        let hist = History::Function(Box::new(|t: f64| vec![t]));
        // x' = -(t - 1) on [0, 1] with x(0) = 0 → x = t - t²/2.
        let traj = integrate(&sys, &hist, 1.0, IntegrationOptions::default()).unwrap();
        assert!((traj.last()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn step_validation() {
        let sys = LinearDelay { a: 1.0, tau: 1.0 };
        let h = History::constant(vec![1.0]);
        assert!(matches!(
            integrate_dde(&sys, &h, 1.0, 0.01),
            Err(Error::InvalidStep { .. })
        ));
        assert!(matches!(
            integrate_dde(&sys, &h, 1.0, 1.0 / 333.3),
            Err(Error::InvalidStep { .. })
        ));
        assert!(integrate_dde(&sys, &h, 1.0, 1.0 / 250.0).is_ok());
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        struct Explode;
        impl DelayedSystem for Explode {
            fn dim(&self) -> usize {
                1
            }
            fn delay(&self) -> f64 {
                0.01
            }
            fn rhs(&self, now: &[f64], _d: &[f64], out: &mut [f64]) {
                out[0] = now[0] * now[0];
            }
        }
        let err = integrate(
            &Explode,
            &History::constant(vec![1.0]),
            5.0,
            IntegrationOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::Integration { time } => assert!(time > 0.9 && time < 1.1, "{time}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let sys = LinearDelay { a: 1.0, tau: 1.0 };
        let traj = integrate(
            &sys,
            &History::constant(vec![1.0]),
            1.0,
            IntegrationOptions {
                steps_per_delay: 200,
                record_every: 100,
            },
        )
        .unwrap();
        let csv = traj.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t,x0");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0.00000000000e0,1.00000000000e0");
    }
}
