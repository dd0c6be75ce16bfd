//! Congestion-window state machines of the TCP senders.
//!
//! Windows are counted in packets. Every acknowledgement and every loss event
//! is fed to the machine of its flow; the sender may have `floor(win)` packets
//! outstanding.

use redlab::CompoundParams;

use crate::config::{TcpTuning, Traffic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    SlowStart,
    CongestionAvoidance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowEvent {
    /// One new packet acknowledged, with the round-trip time it measured.
    Ack {
        rtt_sample: f64,
    },
    Loss,
}

/// Loss-based and delay-based components of a Compound window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundWindow {
    pub cwnd: f64,
    pub dwnd: f64,
    pub ssthresh: f64,
    pub base_rtt: f64,
    pub phase: Phase,
}

impl CompoundWindow {
    pub fn new(initial: f64, slow_start: bool) -> Self {
        CompoundWindow {
            cwnd: initial.max(1.0),
            dwnd: 0.0,
            ssthresh: if slow_start { f64::INFINITY } else { initial.max(1.0) },
            base_rtt: f64::INFINITY,
            phase: if slow_start {
                Phase::SlowStart
            } else {
                Phase::CongestionAvoidance
            },
        }
    }

    /// Sending window; the receiver window is unbounded.
    pub fn win(&self) -> f64 {
        self.cwnd + self.dwnd
    }
}

/// Compound TCP's reaction to one event.
///
/// In congestion avoidance each ack adds `1/win` to `cwnd` and a `1/win`
/// share of the per-round delay-window change: `(α winᵏ − 1)⁺` while the
/// estimated backlog `diff` is below `γ̃`, and `−ζ diff` once it is not.
/// A loss halves `cwnd` and sets `dwnd = (win(1−β) − cwnd/2)⁺`.
pub fn compound_window_update(
    mut s: CompoundWindow,
    event: WindowEvent,
    params: &CompoundParams,
    gamma_tilde: f64,
    zeta: f64,
) -> CompoundWindow {
    match event {
        WindowEvent::Ack { rtt_sample } => {
            s.base_rtt = s.base_rtt.min(rtt_sample);
            if s.phase == Phase::SlowStart {
                s.cwnd += 1.0;
                if s.cwnd >= s.ssthresh {
                    s.phase = Phase::CongestionAvoidance;
                }
                return s;
            }
            let win = s.win();
            s.cwnd += 1.0 / win;
            let diff = (win / s.base_rtt - win / rtt_sample) * s.base_rtt;
            if diff < gamma_tilde {
                s.dwnd += (params.alpha * win.powf(params.k) - 1.0).max(0.0) / win;
            } else {
                s.dwnd = (s.dwnd - zeta * diff / win).max(0.0);
            }
            s
        }
        WindowEvent::Loss => {
            let win = s.win();
            s.cwnd = (s.cwnd / 2.0).max(1.0);
            s.dwnd = (win * (1.0 - params.beta) - s.cwnd).max(0.0);
            s.ssthresh = s.win().max(2.0);
            s.phase = Phase::CongestionAvoidance;
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicWindow {
    pub cwnd: f64,
    pub ssthresh: f64,
    pub phase: Phase,
    w_max: f64,
    k: f64,
    epoch: Option<f64>,
    /// Reno-equivalent window for the friendliness bound.
    w_est: f64,
}

impl CubicWindow {
    pub fn new(initial: f64, slow_start: bool) -> Self {
        CubicWindow {
            cwnd: initial.max(1.0),
            ssthresh: if slow_start { f64::INFINITY } else { initial.max(1.0) },
            phase: if slow_start {
                Phase::SlowStart
            } else {
                Phase::CongestionAvoidance
            },
            w_max: 0.0,
            k: 0.0,
            epoch: None,
            w_est: initial.max(1.0),
        }
    }

    fn on_ack(&mut self, now: f64, rtt: f64, c: f64, beta: f64) {
        if self.phase == Phase::SlowStart {
            self.cwnd += 1.0;
            if self.cwnd >= self.ssthresh {
                self.phase = Phase::CongestionAvoidance;
            }
            return;
        }
        let epoch = *self.epoch.get_or_insert_with(|| {
            if self.cwnd < self.w_max {
                self.k = ((self.w_max - self.cwnd) / c).cbrt();
            } else {
                self.k = 0.0;
                self.w_max = self.cwnd;
            }
            self.w_est = self.cwnd;
            now
        });
        let t = now - epoch + rtt;
        let target = c * (t - self.k).powi(3) + self.w_max;
        if target > self.cwnd {
            self.cwnd += (target - self.cwnd) / self.cwnd;
        } else {
            self.cwnd += 0.01 / self.cwnd;
        }
        self.w_est += 3.0 * (1.0 - beta) / (1.0 + beta) / self.cwnd;
        if self.w_est > self.cwnd {
            self.cwnd = self.w_est;
        }
    }

    fn on_loss(&mut self, beta: f64) {
        self.w_max = self.cwnd;
        self.cwnd = (self.cwnd * beta).max(1.0);
        self.ssthresh = self.cwnd.max(2.0);
        self.phase = Phase::CongestionAvoidance;
        self.epoch = None;
    }
}

/// Window state of one TCP sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// Reno runs here too, with the Compound parameters `(1, 0, 1/2)`, which
    /// keep `dwnd` at zero.
    Compound {
        state: CompoundWindow,
        params: CompoundParams,
    },
    Cubic(CubicWindow),
}

impl Window {
    pub fn new(traffic: Traffic, tuning: &TcpTuning, slow_start: bool) -> Self {
        let iw = tuning.initial_window;
        match traffic {
            Traffic::Cubic => Window::Cubic(CubicWindow::new(iw, slow_start)),
            Traffic::Compound => Window::Compound {
                state: CompoundWindow::new(iw, slow_start),
                params: tuning.compound,
            },
            _ => Window::Compound {
                state: CompoundWindow::new(iw, slow_start),
                params: CompoundParams::RENO,
            },
        }
    }

    pub fn win(&self) -> f64 {
        match self {
            Window::Compound { state, .. } => state.win(),
            Window::Cubic(c) => c.cwnd,
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            Window::Compound { state, .. } => state.phase,
            Window::Cubic(c) => c.phase,
        }
    }

    pub fn on_ack(&mut self, now: f64, rtt_sample: f64, tuning: &TcpTuning) {
        match self {
            Window::Compound { state, params } => {
                *state = compound_window_update(
                    *state,
                    WindowEvent::Ack { rtt_sample },
                    params,
                    tuning.gamma_tilde,
                    tuning.zeta,
                );
            }
            Window::Cubic(c) => c.on_ack(now, rtt_sample, tuning.cubic_c, tuning.cubic_beta),
        }
    }

    pub fn on_loss(&mut self, tuning: &TcpTuning) {
        match self {
            Window::Compound { state, params } => {
                *state = compound_window_update(*state, WindowEvent::Loss, params, tuning.gamma_tilde, tuning.zeta);
            }
            Window::Cubic(c) => c.on_loss(tuning.cubic_beta),
        }
    }

    /// Retransmission timeout: one packet, slow start up to half the old window.
    pub fn on_timeout(&mut self) {
        let half = (self.win() / 2.0).max(2.0);
        match self {
            Window::Compound { state, .. } => {
                state.cwnd = 1.0;
                state.dwnd = 0.0;
                state.ssthresh = half;
                state.phase = Phase::SlowStart;
            }
            Window::Cubic(c) => {
                c.w_max = c.cwnd;
                c.cwnd = 1.0;
                c.ssthresh = half;
                c.phase = Phase::SlowStart;
                c.epoch = None;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ca(cwnd: f64, dwnd: f64) -> CompoundWindow {
        CompoundWindow {
            cwnd,
            dwnd,
            ssthresh: 2.0,
            base_rtt: 0.1,
            phase: Phase::CongestionAvoidance,
        }
    }

    #[test]
    fn loss_halves_cwnd_and_rebuilds_dwnd() {
        let s = compound_window_update(ca(12.0, 8.0), WindowEvent::Loss, &CompoundParams::default(), 30.0, 0.5);
        assert_eq!(s.cwnd, 6.0);
        assert_eq!(s.dwnd, 4.0);
    }

    #[test]
    fn dwnd_increment_vanishes_at_sixteen() {
        // 0.125 * 16^0.75 = 1 exactly.
        let p = CompoundParams::default();
        assert_eq!(p.alpha * 16f64.powf(p.k), 1.0);
        let s = compound_window_update(ca(16.0, 0.0), WindowEvent::Ack { rtt_sample: 0.1 }, &p, 30.0, 0.5);
        assert_eq!(s.dwnd, 0.0);
        assert_eq!(s.cwnd, 16.0 + 1.0 / 16.0);
    }

    #[test]
    fn large_backlog_drains_dwnd() {
        let p = CompoundParams::default();
        // win = 100, rtt twice the base: diff = 50 >= 30.
        let s = compound_window_update(ca(60.0, 40.0), WindowEvent::Ack { rtt_sample: 0.2 }, &p, 30.0, 0.5);
        assert!((s.dwnd - (40.0 - 0.5 * 50.0 / 100.0)).abs() < 1e-12);
        assert!(s.dwnd >= 0.0);
    }

    #[test]
    fn slow_start_doubles_per_round() {
        let mut s = CompoundWindow::new(2.0, true);
        let p = CompoundParams::default();
        for _ in 0..2 {
            s = compound_window_update(s, WindowEvent::Ack { rtt_sample: 0.1 }, &p, 30.0, 0.5);
        }
        assert_eq!(s.cwnd, 4.0);
        assert_eq!(s.phase, Phase::SlowStart);
        s = compound_window_update(s, WindowEvent::Loss, &p, 30.0, 0.5);
        assert_eq!(s.phase, Phase::CongestionAvoidance);
    }

    #[test]
    fn reno_parameters_never_grow_dwnd() {
        let mut s = ca(10.0, 0.0);
        for _ in 0..1000 {
            s = compound_window_update(
                s,
                WindowEvent::Ack { rtt_sample: 0.1 },
                &CompoundParams::RENO,
                30.0,
                0.5,
            );
        }
        assert_eq!(s.dwnd, 0.0);
    }

    #[test]
    fn cubic_recovers_towards_the_previous_maximum() {
        let tuning = TcpTuning::default();
        let mut w = Window::new(Traffic::Cubic, &tuning, false);
        if let Window::Cubic(c) = &mut w {
            c.cwnd = 100.0;
        }
        w.on_loss(&tuning);
        assert!((w.win() - 70.0).abs() < 1e-12);
        let (mut now, rtt) = (0.0, 0.1);
        while now < 20.0 {
            let n = w.win().floor() as usize;
            for _ in 0..n {
                w.on_ack(now, rtt, &tuning);
            }
            now += rtt;
        }
        assert!(w.win() > 100.0, "{}", w.win());
    }

    #[test]
    fn timeout_restarts_from_one_packet() {
        let tuning = TcpTuning::default();
        for traffic in [Traffic::Compound, Traffic::Cubic, Traffic::Reno] {
            let mut w = Window::new(traffic, &tuning, false);
            for _ in 0..50 {
                w.on_ack(0.0, 0.1, &tuning);
            }
            w.on_timeout();
            assert_eq!(w.win(), 1.0);
            assert_eq!(w.phase(), Phase::SlowStart);
        }
    }
}
