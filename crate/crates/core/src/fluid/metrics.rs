use crate::error::{Error, Result};
use crate::fluid::Trajectory;

/// Post-transient statistics of the window (first state component).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationMetrics {
    pub min: f64,
    pub max: f64,
    /// Peak-to-peak, `max - min`.
    pub amplitude: f64,
    /// Mean spacing of upward crossings of the mean; absent when the signal
    /// does not oscillate.
    pub period: Option<f64>,
}

/// Window statistics after `transient_cut` seconds. Requires at least 50
/// delays of data after the cut.
pub fn oscillation_metrics(traj: &Trajectory, transient_cut: f64) -> Result<OscillationMetrics> {
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let needed = 50.0 * traj.delay;
    let available = t_end - transient_cut;
    if available < needed * (1.0 - 1e-9) {
        return Err(Error::WindowTooShort { needed, available });
    }
    let start = traj.times.partition_point(|&t| t < transient_cut);
    let times = &traj.times[start..];
    let w: Vec<f64> = traj.component(0).skip(start).collect();
    Ok(series_metrics(times, &w))
}

pub(crate) fn series_metrics(times: &[f64], x: &[f64]) -> OscillationMetrics {
    let (min, max) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let amplitude = max - min;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let period = if amplitude > 1e-9 * (1.0 + mean.abs()) {
        upward_crossing_period(times, x, mean)
    } else {
        None
    };
    OscillationMetrics {
        min,
        max,
        amplitude,
        period,
    }
}

fn upward_crossing_period(times: &[f64], x: &[f64], level: f64) -> Option<f64> {
    let mut crossings = Vec::new();
    for n in 1..x.len() {
        let (a, b) = (x[n - 1] - level, x[n] - level);
        if a < 0.0 && b >= 0.0 {
            let frac = -a / (b - a);
            crossings.push(times[n - 1] + frac * (times[n] - times[n - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

/// Peak-to-peak amplitude of component `i` in consecutive windows of
/// `window` seconds starting at `from`. Used to tell decay from persistence.
pub fn windowed_amplitudes(traj: &Trajectory, component: usize, from: f64, window: f64) -> Vec<f64> {
    let xs: Vec<f64> = traj.component(component).collect();
    let mut out = Vec::new();
    let mut lo = from;
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    while lo + window <= t_end + 1e-9 * window {
        let a = traj.times.partition_point(|&t| t < lo);
        let b = traj.times.partition_point(|&t| t <= lo + window);
        if b > a {
            let (mn, mx) = xs[a..b]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            out.push(mx - mn);
        }
        lo += window;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, t_end: f64, delay: f64) -> Trajectory {
        let n = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let states = times.iter().map(|&t| f(t)).collect();
        Trajectory {
            labels: vec!["w".into()],
            delay,
            step: dt,
            times,
            states,
        }
    }

    #[test]
    fn constant_signal() {
        let traj = synthetic(|_| 4.0, 0.01, 100.0, 1.0);
        let m = oscillation_metrics(&traj, 10.0).unwrap();
        assert_eq!(m.amplitude, 0.0);
        assert_eq!(m.period, None);
    }

    #[test]
    fn sinusoid() {
        let dt = 0.01;
        let traj = synthetic(|t| 3.0 + (2.0 * std::f64::consts::PI * t / 5.0).sin(), dt, 200.0, 1.0);
        let m = oscillation_metrics(&traj, 20.0).unwrap();
        assert!((m.amplitude - 2.0).abs() < 1e-6);
        assert!((m.period.unwrap() - 5.0).abs() <= dt);
        assert!((m.min - 2.0).abs() < 1e-6 && (m.max - 4.0).abs() < 1e-6);
    }

    #[test]
    fn short_window_rejected() {
        let traj = synthetic(|_| 1.0, 0.01, 60.0, 1.0);
        assert!(matches!(
            oscillation_metrics(&traj, 20.0),
            Err(Error::WindowTooShort { .. })
        ));
    }

    #[test]
    fn windowed_amplitude_tracks_decay() {
        let traj = synthetic(|t| (-0.05 * t).exp() * t.sin(), 0.01, 100.0, 1.0);
        let a = windowed_amplitudes(&traj, 0, 10.0, 20.0);
        assert_eq!(a.len(), 4);
        assert!(a.windows(2).all(|p| p[1] < p[0]));
    }
}
