use proptest::prelude::*;
use redlab::CompoundParams;
use redlab_sim::{compound_window_update, CompoundWindow, Phase, TcpTuning, WindowEvent};

const BASE: f64 = 0.1;

fn avoidance(cwnd: f64, dwnd: f64) -> CompoundWindow {
    CompoundWindow {
        cwnd,
        dwnd,
        ssthresh: 1.0,
        base_rtt: BASE,
        phase: Phase::CongestionAvoidance,
    }
}

/// Feeds one round of acknowledgements, one per packet of the window the
/// round started with, all measuring `rtt`.
fn one_round(mut s: CompoundWindow, rtt: f64) -> CompoundWindow {
    let t = TcpTuning::default();
    let acks = s.win().round() as usize;
    for _ in 0..acks {
        s = compound_window_update(
            s,
            WindowEvent::Ack { rtt_sample: rtt },
            &t.compound,
            t.gamma_tilde,
            t.zeta,
        );
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lossless_round_adds_alpha_w_to_the_k(w in 16u32..=256, share in 0.0..1.0f64) {
        let w = w as f64;
        let cwnd = (w * share).max(1.0);
        let s0 = avoidance(cwnd, w - cwnd);
        let s1 = one_round(s0, BASE);
        let p = CompoundParams::default();
        let expected = p.alpha * w.powf(p.k);
        let gained = s1.win() - s0.win();
        prop_assert!((gained / expected - 1.0).abs() < 0.05, "w {w}: gained {gained}, aggregate {expected}");
        prop_assert!((s1.cwnd - s0.cwnd - 1.0).abs() < 0.05);
    }

    #[test]
    fn backlog_drains_dwnd_by_zeta_diff_per_round(w in 128u32..=256, backlog in 60.0..90.0f64) {
        // Large enough that the backlog stays above the detection threshold
        // while the window shrinks during the round.
        let w = w as f64;
        // The measured round trip that makes `diff` equal `backlog`.
        let rtt = BASE * w / (w - backlog);
        let s0 = avoidance(w / 4.0, 3.0 * w / 4.0);
        let s1 = one_round(s0, rtt);
        let t = TcpTuning::default();
        let drained = s0.dwnd - s1.dwnd;
        prop_assert!((drained / (t.zeta * backlog) - 1.0).abs() < 0.05, "drained {drained}");
    }
}

#[test]
fn small_windows_grow_like_reno() {
    // Below the window where α wᵏ = 1 the delay window cannot grow, so a
    // round adds exactly the loss-based increment of one packet.
    for w in [8.0, 10.0, 12.0, 15.0] {
        let s1 = one_round(avoidance(w, 0.0), BASE);
        assert_eq!(s1.dwnd, 0.0);
        assert!((s1.win() - w - 1.0).abs() < 0.05, "{w}: {}", s1.win());
    }
}

#[test]
fn reno_parameters_reduce_to_additive_increase() {
    let t = TcpTuning::default();
    let mut s = avoidance(40.0, 0.0);
    for _ in 0..40 {
        s = compound_window_update(
            s,
            WindowEvent::Ack { rtt_sample: BASE },
            &CompoundParams::RENO,
            t.gamma_tilde,
            t.zeta,
        );
    }
    assert_eq!(s.dwnd, 0.0);
    assert!((s.cwnd - 41.0).abs() < 0.02);
    let s = compound_window_update(s, WindowEvent::Loss, &CompoundParams::RENO, t.gamma_tilde, t.zeta);
    assert!((s.win() - 41.0 / 2.0).abs() < 0.02, "{}", s.win());
}
