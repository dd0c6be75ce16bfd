//! Direct evaluation of the characteristic quasi-polynomial, complex Newton
//! refinement of its roots, and right-half-plane root counting by the
//! argument principle. These do not use any of the closed-form crossing
//! conditions and serve as an independent check on them.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fluid::FluidSystemKind;
use crate::stability::CharCoefficients;

/// Characteristic function value at `lambda`.
pub fn char_residual(c: &CharCoefficients, lambda: Complex64, tau: f64, kappa: f64) -> Complex64 {
    let e = (-lambda * tau).exp();
    let k = kappa;
    match c.kind {
        FluidSystemKind::WithAveraging => {
            let l2 = lambda * lambda;
            l2 * lambda + k * c.a1 * l2 + k * k * c.a2 * lambda + k.powi(3) * (c.a3 + c.a4 * e)
        }
        FluidSystemKind::NoAveraging => lambda * lambda + k * c.a1 * lambda + k * k * (c.a2 + c.a3 * e),
        FluidSystemKind::Threshold => lambda + k * (c.a1 + c.a2 * e),
    }
}

/// `∂F/∂λ` of the characteristic function.
pub fn char_dlambda(c: &CharCoefficients, lambda: Complex64, tau: f64, kappa: f64) -> Complex64 {
    let e = (-lambda * tau).exp();
    let k = kappa;
    match c.kind {
        FluidSystemKind::WithAveraging => {
            3.0 * lambda * lambda + 2.0 * k * c.a1 * lambda + k * k * c.a2 - tau * k.powi(3) * c.a4 * e
        }
        FluidSystemKind::NoAveraging => 2.0 * lambda + k * c.a1 - tau * k * k * c.a3 * e,
        FluidSystemKind::Threshold => Complex64::new(1.0, 0.0) - tau * k * c.a2 * e,
    }
}

/// `∂F/∂κ` of the characteristic function.
pub fn char_dkappa(c: &CharCoefficients, lambda: Complex64, tau: f64, kappa: f64) -> Complex64 {
    let e = (-lambda * tau).exp();
    let k = kappa;
    match c.kind {
        FluidSystemKind::WithAveraging => {
            c.a1 * lambda * lambda + 2.0 * k * c.a2 * lambda + 3.0 * k * k * (c.a3 + c.a4 * e)
        }
        FluidSystemKind::NoAveraging => c.a1 * lambda + 2.0 * k * (c.a2 + c.a3 * e),
        FluidSystemKind::Threshold => c.a1 + c.a2 * e,
    }
}

/// Newton iteration on the characteristic function from `guess`.
pub fn newton_root(c: &CharCoefficients, guess: Complex64, tau: f64, kappa: f64) -> Result<Complex64> {
    let mut z = guess;
    for _ in 0..100 {
        let f = char_residual(c, z, tau, kappa);
        let df = char_dlambda(c, z, tau, kappa);
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(Error::Convergence(format!(
        "characteristic root near {guess} did not converge"
    )))
}

/// Radius beyond which no root with `Re λ >= 0` exists: there `|e^{-λτ}| <= 1`,
/// so the leading power dominates once `r^n > Σ |coefficient| r^j`.
pub fn right_half_plane_radius(c: &CharCoefficients, kappa: f64) -> f64 {
    let k = kappa;
    let lower: Vec<f64> = match c.kind {
        FluidSystemKind::WithAveraging => vec![
            k * c.a1.abs(),
            k * k * c.a2.abs(),
            k.powi(3) * (c.a3.abs() + c.a4.abs()),
        ],
        FluidSystemKind::NoAveraging => vec![k * c.a1.abs(), k * k * (c.a2.abs() + c.a3.abs())],
        FluidSystemKind::Threshold => vec![k * (c.a1.abs() + c.a2.abs())],
    };
    let n = lower.len() as i32;
    let g = |r: f64| {
        r.powi(n)
            - lower
                .iter()
                .enumerate()
                .map(|(j, a)| a * r.powi(n - 1 - j as i32))
                .sum::<f64>()
    };
    let mut r = 1.0;
    while g(r) <= 0.0 {
        r *= 2.0;
    }
    r
}

/// Number of characteristic roots with `Re λ > 0`, by the argument principle
/// on a rectangle that encloses every such root.
pub fn count_rhp_roots(c: &CharCoefficients, tau: f64, kappa: f64) -> Result<usize> {
    let r = right_half_plane_radius(c, kappa) + 1.0;
    let f = |z: Complex64| char_residual(c, z, tau, kappa);
    let corners = [
        Complex64::new(0.0, -r),
        Complex64::new(r, -r),
        Complex64::new(r, r),
        Complex64::new(0.0, r),
    ];
    let mut total = 0.0;
    for s in 0..4 {
        let (a, b) = (corners[s], corners[(s + 1) % 4]);
        total += arg_change(&f, a, b, f(a), f(b), 0)?;
    }
    let winding = total / (2.0 * PI);
    let count = winding.round();
    if (winding - count).abs() > 1e-3 || count < 0.0 {
        return Err(Error::Convergence(format!(
            "argument principle winding {winding} is not an integer"
        )));
    }
    Ok(count as usize)
}

/// Change of `arg f` along the segment `a → b`, subdividing until every
/// piece turns by less than π/4.
fn arg_change(
    f: &impl Fn(Complex64) -> Complex64,
    a: Complex64,
    b: Complex64,
    fa: Complex64,
    fb: Complex64,
    depth: u32,
) -> Result<f64> {
    if fa.norm() == 0.0 || fb.norm() == 0.0 {
        return Err(Error::Degenerate("characteristic root on the counting contour".into()));
    }
    let d = (fb / fa).arg();
    // Coarse segments can hide full turns, so always split a few levels.
    if d.abs() < PI / 4.0 && depth >= 6 {
        return Ok(d);
    }
    if depth > 40 {
        return Err(Error::Convergence(
            "argument-principle contour refinement did not settle".into(),
        ));
    }
    let m = 0.5 * (a + b);
    let fm = f(m);
    Ok(arg_change(f, a, m, fa, fm, depth + 1)? + arg_change(f, m, b, fm, fb, depth + 1)?)
}

/// Roots of the monic cubic `z³ + b z² + c z + d` (Durand–Kerner).
pub fn cubic_roots(b: f64, c: f64, d: f64) -> [Complex64; 3] {
    let p = |z: Complex64| ((z + b) * z + c) * z + d;
    let scale = 1.0 + b.abs().max(c.abs()).max(d.abs());
    let seed = Complex64::new(0.4, 0.9);
    let mut z = [seed * scale, seed * seed * scale, seed * seed * seed * scale];
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..3 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = p(z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * scale {
            break;
        }
    }
    z
}

/// Routh–Hurwitz test for the delay-free (`τ = 0`) characteristic polynomial.
pub fn delay_free_stable(c: &CharCoefficients, kappa: f64) -> bool {
    let k = kappa;
    match c.kind {
        FluidSystemKind::WithAveraging => {
            let (b1, b2, b3) = (k * c.a1, k * k * c.a2, k.powi(3) * (c.a3 + c.a4));
            b1 > 0.0 && b3 > 0.0 && b1 * b2 > b3
        }
        FluidSystemKind::NoAveraging => k * c.a1 > 0.0 && c.a2 + c.a3 > 0.0,
        FluidSystemKind::Threshold => c.a1 + c.a2 > 0.0,
    }
}
