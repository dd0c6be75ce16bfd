//! Non-trivial equilibria of the three fluid systems.

use crate::error::{Error, Result};
use crate::protocol::{
    decrease_rate, increase_rate, threshold_drop_probability, NetworkParams, ProtocolSpec, RedParams, ThresholdParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub w_star: f64,
    /// Absent for the threshold system, which has no queue state.
    pub q_star: Option<f64>,
    pub p_star: f64,
    /// Largest absolute residual of the defining equations.
    pub residual: f64,
    /// Set when the RED equilibrium leaves the affine band `(b_min, b_max)`.
    pub warning: Option<String>,
    /// Threshold system only: `(w*)^(k-1)` from the closed form that drops the
    /// `1 - p*` factor. Compound-form protocols only.
    pub closed_form_w_pow: Option<f64>,
}

/// Bisection to the limit of double precision. `f(lo)` and `f(hi)` must have
/// opposite signs.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Window balance `i(w)(1-p) - d(w)p`, scaled by `i + d` so the root search
/// works on a quantity of order one.
fn window_balance(spec: &ProtocolSpec, w: f64, p: f64) -> Result<f64> {
    let i = increase_rate(spec, w, 0)?;
    let d = decrease_rate(spec, w, 0)?;
    Ok((i * (1.0 - p) - d * p) / (i + d))
}

/// Solves the window equations shared by both RED systems; returns `(w*, p*)`.
fn red_window_fixed_point(spec: &ProtocolSpec, net: &NetworkParams) -> Result<(f64, f64)> {
    spec.validate()?;
    net.validate()?;
    let bdp = net.bdp();
    // p = 1 - C̃τ/w maps w ∈ (C̃τ, ∞) onto p ∈ (0, 1): the balance is positive at
    // the lower end (p = 0) and tends to -1 as p -> 1.
    let drop = |w: f64| 1.0 - bdp / w;
    let lo = bdp * (1.0 + 1e-15);
    let mut hi = 2.0 * bdp;
    let mut expansions = 0;
    while window_balance(spec, hi, drop(hi))? > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Convergence(
                "no equilibrium with drop probability in (0, 1)".into(),
            ));
        }
    }
    let w = bisect(lo, hi, |w| window_balance(spec, w, drop(w)))?;
    let p = drop(w);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Convergence(format!(
            "equilibrium drop probability {p} outside (0, 1)"
        )));
    }
    Ok((w, p))
}

fn red_equilibrium(spec: &ProtocolSpec, red: &RedParams, net: &NetworkParams) -> Result<Equilibrium> {
    red.validate()?;
    let (w, p) = red_window_fixed_point(spec, net)?;
    let q = p / red.rho() + red.b_min;
    let i = increase_rate(spec, w, 0)?;
    let d = decrease_rate(spec, w, 0)?;
    let residual = (i * (1.0 - p) - d * p)
        .abs()
        .max((w * (1.0 - p) - net.bdp()).abs())
        .max((q - p / red.rho() - red.b_min).abs());
    let warning = if q >= red.b_max {
        Some(format!(
            "equilibrium queue {q:.3} lies above b_max = {}; the affine RED band assumption does not hold",
            red.b_max
        ))
    } else {
        None
    };
    Ok(Equilibrium {
        w_star: w,
        q_star: Some(q),
        p_star: p,
        residual,
        warning,
        closed_form_w_pow: None,
    })
}

/// Equilibrium of the RED system with queue averaging.
pub fn equilibrium_with_averaging(spec: &ProtocolSpec, red: &RedParams, net: &NetworkParams) -> Result<Equilibrium> {
    red_equilibrium(spec, red, net)
}

/// Equilibrium of the RED system without averaging. The averaging weight does
/// not enter the fixed point, so this agrees with the averaged system.
pub fn equilibrium_no_averaging(spec: &ProtocolSpec, red: &RedParams, net: &NetworkParams) -> Result<Equilibrium> {
    red_equilibrium(spec, red, net)
}

/// Equilibrium of the threshold-policy system, where `p` depends on the window.
pub fn equilibrium_threshold(spec: &ProtocolSpec, net: &NetworkParams, th: &ThresholdParams) -> Result<Equilibrium> {
    spec.validate()?;
    net.validate()?;
    th.validate()?;
    let bdp = net.bdp();
    let balance = |w: f64| window_balance(spec, w, threshold_drop_probability(w, net, th));
    // At w = C̃τ the drop probability is one, so the balance is -1 there.
    let mut lo = bdp * 0.5;
    let mut shrinks = 0;
    while balance(lo)? <= 0.0 {
        lo *= 0.5;
        shrinks += 1;
        if shrinks > 1000 {
            return Err(Error::Convergence("threshold equilibrium not bracketed".into()));
        }
    }
    let w = bisect(lo, bdp, balance)?;
    let p = threshold_drop_probability(w, net, th);
    let i = increase_rate(spec, w, 0)?;
    let d = decrease_rate(spec, w, 0)?;
    let residual = (i * (1.0 - p) - d * p).abs();

    let closed_form_w_pow = match spec.compound_form() {
        Some(c) => {
            let expo = th.q_th + 2.0 - c.k;
            // In logs: C̃τ^q_th overflows for large thresholds.
            let w_closed = (((c.alpha / c.beta).ln() + th.q_th * bdp.ln()) / expo).exp();
            // Restoring the dropped (1 - p*) factor must recover the root.
            let corrected = w_closed * (1.0 - p).powf(1.0 / expo);
            if ((corrected - w) / w).abs() > 1e-6 {
                return Err(Error::Inconsistent(format!(
                    "closed-form window {corrected} disagrees with the root {w}"
                )));
            }
            Some(w_closed.powf(c.k - 1.0))
        }
        None => None,
    };

    Ok(Equilibrium {
        w_star: w,
        q_star: None,
        p_star: p,
        residual,
        warning: None,
        closed_form_w_pow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{CompoundParams, IllinoisParams};

    /// Independent oracle: bisection on p of `p = αw^(k-2)/(αw^(k-2)+β)` with
    /// `w = C̃τ/(1-p)`.
    fn p_fixed_point_oracle(c: CompoundParams, bdp: f64) -> (f64, f64) {
        let g = |p: f64| {
            let w = bdp / (1.0 - p);
            let r = c.alpha * w.powf(c.k - 2.0);
            p - r / (r + c.beta)
        };
        let (mut lo, mut hi) = (1e-300, 1.0 - 1e-15);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        (bdp / (1.0 - p), p)
    }

    #[test]
    fn with_averaging_matches_oracle() {
        let spec = ProtocolSpec::default();
        let red = RedParams::default();
        let net = NetworkParams::new(100.0, 0.0848);
        let eq = equilibrium_with_averaging(&spec, &red, &net).unwrap();
        let (w_o, p_o) = p_fixed_point_oracle(CompoundParams::default(), 8.48);
        assert!((eq.w_star - w_o).abs() / w_o < 1e-10);
        assert!((eq.p_star - p_o).abs() / p_o < 1e-9);
        assert!((eq.w_star * (1.0 - eq.p_star) - 8.48).abs() < 1e-12);
        assert!((eq.w_star - 8.62).abs() < 0.01);
        assert!((eq.p_star - 0.0166).abs() < 1e-4);
        assert!((eq.q_star.unwrap() - 133.0).abs() < 1.0);
        assert!(eq.residual < 1e-9);
        assert!(eq.warning.is_none());
    }

    #[test]
    fn fig3_operating_point() {
        let red = RedParams {
            gamma: 0.032,
            ..Default::default()
        };
        let net = NetworkParams::new(100.0, 0.171);
        let eq = equilibrium_with_averaging(&ProtocolSpec::default(), &red, &net).unwrap();
        assert!((eq.w_star - 17.0).abs() < 0.5, "w* = {}", eq.w_star);
    }

    #[test]
    fn no_averaging_agrees_with_averaging() {
        let spec = ProtocolSpec::default();
        let net = NetworkParams::new(100.0, 0.273);
        let a = equilibrium_with_averaging(&spec, &RedParams::default(), &net).unwrap();
        let b = equilibrium_no_averaging(
            &spec,
            &RedParams {
                gamma: 0.5,
                ..Default::default()
            },
            &net,
        )
        .unwrap();
        assert!((a.w_star - b.w_star).abs() <= 1e-12 * a.w_star);
        assert!((a.p_star - b.p_star).abs() <= 1e-12);
        assert!((b.p_star - 3.96e-3).abs() < 0.03e-3);
        assert!((b.w_star - 27.4).abs() < 0.05);
    }

    #[test]
    fn small_increase_gain_limit() {
        let spec = ProtocolSpec::Compound(CompoundParams {
            alpha: 1e-9,
            ..Default::default()
        });
        let net = NetworkParams::new(100.0, 0.1);
        let eq = equilibrium_with_averaging(&spec, &RedParams::default(), &net).unwrap();
        assert!(eq.p_star < 1e-9);
        assert!((eq.w_star - 10.0).abs() < 1e-6);
    }

    #[test]
    fn steep_red_pins_queue() {
        let red = RedParams {
            b_min: 50.0,
            b_max: 50.0 + 1e-6,
            ..Default::default()
        };
        let net = NetworkParams::new(100.0, 0.273);
        let eq = equilibrium_no_averaging(&ProtocolSpec::default(), &red, &net).unwrap();
        assert!((eq.q_star.unwrap() - 50.0).abs() < 1e-5);
    }

    #[test]
    fn out_of_band_is_flagged() {
        // Short delay forces a large drop probability and a queue beyond b_max.
        let net = NetworkParams::new(100.0, 0.01);
        let eq = equilibrium_with_averaging(&ProtocolSpec::default(), &RedParams::default(), &net).unwrap();
        assert!(eq.p_star > 0.1);
        assert!(eq.warning.is_some());
    }

    #[test]
    fn threshold_equilibrium() {
        let net = NetworkParams::new(100.0, 1.0);
        let th = ThresholdParams { q_th: 39.0 };
        let eq = equilibrium_threshold(&ProtocolSpec::default(), &net, &th).unwrap();
        assert!(eq.residual < 1e-9);
        assert!(eq.w_star > 20.0 && eq.w_star < 100.0);
        let i = 0.125 * eq.w_star.powf(-0.25);
        let d = 0.5 * eq.w_star;
        assert!((eq.p_star - i / (i + d)).abs() < 1e-9);

        // The closed form neglects 1 - p*; it is close but not exact.
        let exact_pow = eq.w_star.powf(-0.25);
        let cf = eq.closed_form_w_pow.unwrap();
        let rel = (cf - exact_pow).abs() / exact_pow;
        let bound = 0.25 * eq.p_star / (39.0 + 1.25) * 1.01;
        assert!(rel <= bound, "rel {rel} bound {bound}");
    }

    #[test]
    fn threshold_linear_drop_law() {
        let net = NetworkParams::new(100.0, 1.0);
        let th = ThresholdParams { q_th: 1.0 };
        let eq = equilibrium_threshold(&ProtocolSpec::default(), &net, &th).unwrap();
        // p = w/100 and αw^(k-1)(1-p) = βwp, solved by plain bisection.
        let g = |w: f64| 0.125 * w.powf(-0.25) * (1.0 - w / 100.0) - 0.5 * w * w / 100.0;
        let (mut lo, mut hi) = (1e-9, 100.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert!((eq.w_star - lo).abs() < 1e-9);
        assert!((eq.p_star - lo / 100.0).abs() < 1e-11);
    }

    #[test]
    fn threshold_reno() {
        let net = NetworkParams::new(100.0, 1.0);
        let th = ThresholdParams { q_th: 20.0 };
        let eq = equilibrium_threshold(&ProtocolSpec::Reno, &net, &th).unwrap();
        // Reno balance: (1-p)/w = p w/2, i.e. p = 2/(w² + 2).
        let g = |w: f64| (w / 100.0).powi(20) - 2.0 / (w * w + 2.0);
        let (mut lo, mut hi) = (1.0, 100.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert!((eq.w_star - lo).abs() < 1e-9 * lo);
        assert!((eq.p_star - 2.0 / (lo * lo + 2.0)).abs() < 1e-10);
    }

    #[test]
    fn illinois_and_africa_equilibria_exist() {
        let net = NetworkParams::new(100.0, 0.2);
        for spec in [ProtocolSpec::Illinois(IllinoisParams::default()), ProtocolSpec::Africa] {
            let eq = equilibrium_no_averaging(&spec, &RedParams::default(), &net).unwrap();
            assert!(eq.residual < 1e-9, "{spec:?}: {}", eq.residual);
            assert!(eq.w_star > 20.0);
        }
    }
}
