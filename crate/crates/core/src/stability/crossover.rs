use std::f64::consts::PI;

use crate::equilibrium::bisect;
use crate::error::{Error, Result};
use crate::fluid::FluidSystemKind;
use crate::stability::roots::delay_free_stable;
use crate::stability::CharCoefficients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossover {
    /// Frequency (rad/s) at which a root pair sits on the imaginary axis for
    /// a suitable delay.
    Frequency(f64),
    /// No purely imaginary root for any delay: stable independent of delay.
    NoCrossover,
}

impl Crossover {
    pub fn omega(self) -> Option<f64> {
        match self {
            Crossover::Frequency(w) => Some(w),
            Crossover::NoCrossover => None,
        }
    }
}

/// Coefficients `[b, c, d]` of `y³ + b y² + c y + d` with `y = (ω/κ)²`
/// (with averaging), or `[b, c]` of `y² + b y + c` (no averaging).
pub fn magnitude_polynomial(c: &CharCoefficients) -> Vec<f64> {
    match c.kind {
        FluidSystemKind::WithAveraging => vec![
            c.a1 * c.a1 - 2.0 * c.a2,
            c.a2 * c.a2 - 2.0 * c.a1 * c.a3,
            c.a3 * c.a3 - c.a4 * c.a4,
        ],
        FluidSystemKind::NoAveraging => vec![c.a1 * c.a1 - 2.0 * c.a2, c.a2 * c.a2 - c.a3 * c.a3],
        FluidSystemKind::Threshold => vec![c.a1 * c.a1 - c.a2 * c.a2],
    }
}

/// Number of positive real roots of the monic cubic `y³ + b y² + c y + d` with `d < 0`.
pub fn cubic_positive_root_count(b: f64, c: f64, d: f64) -> usize {
    debug_assert!(d < 0.0);
    let f = |y: f64| ((y + b) * y + c) * y + d;
    // Three positive roots need a local maximum at y > 0 with f > 0.
    let disc = b * b - 3.0 * c;
    if disc <= 0.0 {
        return 1;
    }
    let s = disc.sqrt();
    let y_max = (-b - s) / 3.0;
    let y_min = (-b + s) / 3.0;
    if y_max > 0.0 && f(y_max) > 0.0 && f(y_min) < 0.0 {
        3
    } else if y_max > 0.0 && (f(y_max) == 0.0 || f(y_min) == 0.0) {
        2
    } else {
        1
    }
}

/// Crossover frequency at bifurcation parameter `kappa`.
///
/// With averaging this is the unique positive root of the cubic in `ω²`,
/// which requires `a3² < a4²`. Without averaging the quadratic in `ω²` is
/// solved in closed form and cross-checked against a direct root of the
/// quartic in `ω`.
pub fn crossover_frequency(c: &CharCoefficients, kappa: f64) -> Result<Crossover> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
    }
    let y = match c.kind {
        FluidSystemKind::WithAveraging => {
            let poly = magnitude_polynomial(c);
            let (b, cc, d) = (poly[0], poly[1], poly[2]);
            if !(d < 0.0) {
                return Err(Error::Precondition(format!(
                    "a3² - a4² = {d} is not negative; crossover frequency is not unique"
                )));
            }
            if cubic_positive_root_count(b, cc, d) != 1 {
                return Err(Error::Inconsistent("magnitude cubic has several positive roots".into()));
            }
            let f = |y: f64| Ok(((y + b) * y + cc) * y + d);
            let hi = 1.0 + b.abs().max(cc.abs()).max(d.abs());
            bisect(0.0, hi, f)?
        }
        FluidSystemKind::NoAveraging => {
            let poly = magnitude_polynomial(c);
            let (b, cc) = (poly[0], poly[1]);
            if cc >= 0.0 {
                if b < 0.0 && b * b - 4.0 * cc >= 0.0 {
                    return Err(Error::Precondition("two positive crossover frequencies".into()));
                }
                return Ok(Crossover::NoCrossover);
            }
            let disc = (b * b - 4.0 * cc).sqrt();
            // Cancellation-free form of (-b + √disc)/2.
            let y = if b > 0.0 {
                -2.0 * cc / (b + disc)
            } else {
                0.5 * (-b + disc)
            };
            let quartic = |om: f64| Ok(om.powi(4) + b * om * om + cc);
            let om_direct = bisect(0.0, (b.abs() + cc.abs().sqrt()).sqrt() + 1.0, quartic)?;
            if (om_direct - y.sqrt()).abs() > 1e-9 * y.sqrt() {
                return Err(Error::Inconsistent(format!(
                    "closed-form crossover {} disagrees with quartic root {om_direct}",
                    y.sqrt()
                )));
            }
            y
        }
        FluidSystemKind::Threshold => {
            if c.a2 <= c.a1 {
                return Ok(Crossover::NoCrossover);
            }
            c.a2 * c.a2 - c.a1 * c.a1
        }
    };
    Ok(Crossover::Frequency(kappa * y.sqrt()))
}

/// Phase the delay term must supply at the crossover, in `[0, 2π)`: a root
/// sits at `jω` exactly when `ωτ ≡ θ (mod 2π)`. Independent of `κ` once
/// `ω` scales with it.
pub fn crossing_phase(c: &CharCoefficients, omega: f64, kappa: f64) -> f64 {
    let (k, w) = (kappa, omega);
    let theta = match c.kind {
        FluidSystemKind::WithAveraging => (k * k * c.a2 * w - w * w * w).atan2(k * c.a1 * w * w - k * k * k * c.a3),
        FluidSystemKind::NoAveraging => (k * c.a1 * w).atan2(w * w - k * k * c.a2),
        FluidSystemKind::Threshold => w.atan2(-k * c.a1),
    };
    if theta < 0.0 {
        theta + 2.0 * PI
    } else {
        theta
    }
}

/// Crossing phase shifted into `(-2π, 0)` when the delay-free system is
/// already unstable. The first crossing then lies at `κ = 0`, and the shift
/// keeps the phase residual continuous where the delay-free system loses
/// stability (which is exactly where `θ` passes through zero).
fn effective_phase(c: &CharCoefficients, omega: f64, kappa: f64) -> f64 {
    let theta = crossing_phase(c, omega, kappa);
    if delay_free_stable(c, 1.0) {
        theta
    } else {
        theta - 2.0 * PI
    }
}

/// `ωτ - θ` at the first crossing; negative means the delay is below the
/// first crossing (stable side). `None` when there is no crossover.
pub fn phase_residual(c: &CharCoefficients, tau: f64, kappa: f64) -> Result<Option<(f64, f64)>> {
    match crossover_frequency(c, kappa)? {
        Crossover::NoCrossover => Ok(None),
        Crossover::Frequency(omega) => Ok(Some((omega, omega * tau - effective_phase(c, omega, kappa)))),
    }
}

/// Critical `κ` at fixed coefficients: the smallest `κ` with a root on the
/// imaginary axis. `None` when there is no crossover; zero when the system is
/// unstable for every `κ > 0`.
pub fn critical_kappa(c: &CharCoefficients, tau: f64) -> Result<Option<f64>> {
    match crossover_frequency(c, 1.0)? {
        Crossover::NoCrossover => Ok(None),
        Crossover::Frequency(unit_omega) => {
            let theta = effective_phase(c, unit_omega, 1.0);
            Ok(Some(theta.max(0.0) / (unit_omega * tau)))
        }
    }
}
