use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hopf::{EigenData, TaylorCoefficients};

const DEGENERATE: f64 = 1e-12;

/// One argument of the nonlinearity expanded on the centre manifold:
/// `V = V_z z + V_zb z̄ + V20 z²/2 + V11 z z̄ + …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    pub z: Complex64,
    pub zb: Complex64,
    pub w20: Complex64,
    pub w11: Complex64,
}

/// Coefficients `F20, F11, F02, F21` of `F = Σ F_ij z^i z̄^j / (i! j!)`.
pub type Collected = [Complex64; 4];

/// Contribution of `c X Y` to the collected coefficients.
pub fn collect_quadratic(c: f64, x: &Expansion, y: &Expansion) -> Collected {
    [
        2.0 * c * x.z * y.z,
        c * (x.z * y.zb + x.zb * y.z),
        2.0 * c * x.zb * y.zb,
        c * (2.0 * (x.z * y.w11 + x.w11 * y.z) + x.zb * y.w20 + x.w20 * y.zb),
    ]
}

/// Contribution of `c X Y W`; only `F21` is affected to third order.
pub fn collect_cubic(c: f64, x: &Expansion, y: &Expansion, w: &Expansion) -> Collected {
    let zero = Complex64::new(0.0, 0.0);
    let f21 = 2.0 * c * (x.z * y.z * w.zb + x.z * y.zb * w.z + x.zb * y.z * w.z);
    [zero, zero, zero, f21]
}

fn add(acc: &mut Collected, part: Collected) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

/// Centre-manifold expansions of `x = u1(t)`, `r = u1(t-τ)`, `s = u2(t-τ)`
/// and `y = u2(t)`, given the second-order terms `w20(θ)`, `w11(θ)` at
/// `θ = 0` and `θ = -τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arguments {
    pub x: Expansion,
    pub r: Expansion,
    pub s: Expansion,
    pub y: Expansion,
}

impl Arguments {
    /// `u_t(θ) = z q(θ) + z̄ q̄(θ) + w20(θ) z²/2 + w11(θ) z z̄ + …`, so with the
    /// default phase `x = z + z̄`, `r = z e^{-iω0τ} + …`, `s = φ1 z e^{-iω0τ} + …`.
    pub fn new(e: &EigenData, w20: [[Complex64; 2]; 2], w11: [[Complex64; 2]; 2]) -> Self {
        let (q0, qd) = (e.q(0.0), e.q(-e.tau));
        let [w20_0, w20_d] = w20;
        let [w11_0, w11_d] = w11;
        let arg = |z: Complex64, w20: Complex64, w11: Complex64| Expansion {
            z,
            zb: z.conj(),
            w20,
            w11,
        };
        Arguments {
            x: arg(q0[0], w20_0[0], w11_0[0]),
            r: arg(qd[0], w20_d[0], w11_d[0]),
            s: arg(qd[1], w20_d[1], w11_d[1]),
            y: arg(q0[1], w20_0[1], w11_0[1]),
        }
    }
}

/// Collected nonlinearity `(F1, F2)` of the window and queue equations.
///
/// ```text
/// F1/κ = ξxx x² + ξxr xr + ξxs xs + ξrs rs + ξxxx x³ + ξxxr x²r + ξxxs x²s + ξxrs xrs
/// F2/κ = χxy xy
/// ```
pub fn collect_nonlinearity(t: &TaylorCoefficients, kappa: f64, a: &Arguments) -> [Collected; 2] {
    let Arguments { x, r, s, y } = a;
    let mut f1 = [Complex64::new(0.0, 0.0); 4];
    add(&mut f1, collect_quadratic(t.xi_xx, x, x));
    add(&mut f1, collect_quadratic(t.xi_xr, x, r));
    add(&mut f1, collect_quadratic(t.xi_xs, x, s));
    add(&mut f1, collect_quadratic(t.xi_rs, r, s));
    add(&mut f1, collect_cubic(t.xi_xxx, x, x, x));
    add(&mut f1, collect_cubic(t.xi_xxr, x, x, r));
    add(&mut f1, collect_cubic(t.xi_xxs, x, x, s));
    add(&mut f1, collect_cubic(t.xi_xrs, x, r, s));
    let f2 = collect_quadratic(t.chi_xy, x, y);
    [f1.map(|v| kappa * v), f2.map(|v| kappa * v)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GCoefficients {
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
    pub g21: Complex64,
    /// `(F1, F2)` pairs for `z²`, `z z̄`, `z̄²`, `z² z̄`.
    pub f20: [Complex64; 2],
    pub f11: [Complex64; 2],
    pub f02: [Complex64; 2],
    pub f21: [Complex64; 2],
    /// Constant vectors of `w20(θ)` and `w11(θ)`.
    pub e: [Complex64; 2],
    pub f: [Complex64; 2],
    omega0: f64,
    q0: [Complex64; 2],
}

impl GCoefficients {
    /// `w20(θ) = -g20/(iω0) q(0)e^{iω0θ} - ḡ02/(3iω0) q̄(0)e^{-iω0θ} + E e^{2iω0θ}`.
    pub fn w20(&self, theta: f64) -> [Complex64; 2] {
        let iw = Complex64::new(0.0, self.omega0);
        let e1 = (iw * theta).exp();
        let c_q = -self.g20 / iw * e1;
        let c_qb = -self.g02.conj() / (3.0 * iw) * e1.conj();
        let e2 = (2.0 * iw * theta).exp();
        let q = self.q0;
        [
            c_q * q[0] + c_qb * q[0].conj() + self.e[0] * e2,
            c_q * q[1] + c_qb * q[1].conj() + self.e[1] * e2,
        ]
    }

    /// `w11(θ) = g11/(iω0) q(0)e^{iω0θ} - ḡ11/(iω0) q̄(0)e^{-iω0θ} + F`.
    pub fn w11(&self, theta: f64) -> [Complex64; 2] {
        let iw = Complex64::new(0.0, self.omega0);
        let e1 = (iw * theta).exp();
        let c_q = self.g11 / iw * e1;
        let c_qb = -self.g11.conj() / iw * e1.conj();
        let q = self.q0;
        [
            c_q * q[0] + c_qb * q[0].conj() + self.f[0],
            c_q * q[1] + c_qb * q[1].conj() + self.f[1],
        ]
    }
}

/// `q̄*(0)ᵀ v`, i.e. `B̄(φ̄2 v1 + v2)` at the default phase.
fn project(e: &EigenData, v: [Complex64; 2]) -> Complex64 {
    let a = e.q_adjoint(0.0);
    a[0].conj() * v[0] + a[1].conj() * v[1]
}

fn solve2(m: [[Complex64; 2]; 2], rhs: [Complex64; 2], what: &str) -> Result<[Complex64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < DEGENERATE {
        return Err(Error::Degenerate(format!("singular system for {what}")));
    }
    Ok([
        (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
        (rhs[1] * m[0][0] - rhs[0] * m[1][0]) / det,
    ])
}

/// Second pass of the reduction: `g20, g11, g02` from the expansion along
/// the eigenvectors alone, then `E`, `F` and `w20`, `w11`, then `g21`.
pub fn g_coefficients(t: &TaylorCoefficients, e: &EigenData) -> Result<GCoefficients> {
    let (k, w0, tau) = (e.kappa, e.omega0, e.tau);
    let zero = [[Complex64::new(0.0, 0.0); 2]; 2];
    let first = collect_nonlinearity(t, k, &Arguments::new(e, zero, zero));
    let f20 = [first[0][0], first[1][0]];
    let f11 = [first[0][1], first[1][1]];
    let f02 = [first[0][2], first[1][2]];
    let g20 = project(e, f20);
    let g11 = project(e, f11);
    let g02 = project(e, f02);

    let i = Complex64::i();
    // (A1 B1; A2 B2) E = -F20 and (K1 L1; K2 L2) F = -F11.
    let e_vec = solve2(
        [
            [k * t.xi_x - 2.0 * i * w0, k * t.xi_s * (-2.0 * i * w0 * tau).exp()],
            [Complex64::from(k * t.chi_x), k * t.chi_y - 2.0 * i * w0],
        ],
        [-f20[0], -f20[1]],
        "E",
    )?;
    let f_vec = solve2(
        [
            [Complex64::from(k * t.xi_x), Complex64::from(k * t.xi_s)],
            [Complex64::from(k * t.chi_x), Complex64::from(k * t.chi_y)],
        ],
        [-f11[0], -f11[1]],
        "F",
    )?;

    let mut g = GCoefficients {
        g20,
        g11,
        g02,
        g21: Complex64::new(0.0, 0.0),
        f20,
        f11,
        f02,
        f21: [Complex64::new(0.0, 0.0); 2],
        e: e_vec,
        f: f_vec,
        omega0: w0,
        q0: e.q(0.0),
    };
    let args = Arguments::new(e, [g.w20(0.0), g.w20(-tau)], [g.w11(0.0), g.w11(-tau)]);
    let second = collect_nonlinearity(t, k, &args);
    g.f21 = [second[0][3], second[1][3]];
    g.g21 = project(e, g.f21);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifurcationType {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitStability {
    OrbitallyStable,
    Unstable,
}

impl BifurcationType {
    pub fn name(self) -> &'static str {
        match self {
            BifurcationType::Supercritical => "supercritical",
            BifurcationType::Subcritical => "subcritical",
        }
    }
}

impl OrbitStability {
    pub fn name(self) -> &'static str {
        match self {
            OrbitStability::OrbitallyStable => "orbitally-stable",
            OrbitStability::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormResult {
    pub omega0: f64,
    pub kappa_c: f64,
    /// `α'(0) = Re(dλ/dκ)` at the critical point.
    pub alpha_prime: f64,
    pub g: GCoefficients,
    pub c1: Complex64,
    pub mu2: f64,
    pub beta2: f64,
    pub bifurcation: BifurcationType,
    pub orbit: OrbitStability,
}

impl NormalFormResult {
    /// One-line JSON object with the classification fields.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"omega0\":{:e},\"kappa_c\":{:e},\"c1_re\":{:e},\"c1_im\":{:e},\"mu2\":{:e},\"beta2\":{:e},\"type\":\"{}\",\"orbit\":\"{}\"}}",
            self.omega0,
            self.kappa_c,
            self.c1.re,
            self.c1.im,
            self.mu2,
            self.beta2,
            self.bifurcation.name(),
            self.orbit.name()
        )
    }
}

/// First Lyapunov coefficient and the resulting classification.
pub fn classify_hopf(g: &GCoefficients, omega0: f64, kappa_c: f64, alpha_prime: f64) -> Result<NormalFormResult> {
    if alpha_prime.abs() < DEGENERATE {
        return Err(Error::Degenerate(
            "α'(0) vanishes: the crossing is not transversal".into(),
        ));
    }
    let i = Complex64::i();
    let c1 = i / (2.0 * omega0) * (g.g20 * g.g11 - 2.0 * g.g11.norm_sqr() - g.g02.norm_sqr() / 3.0) + g.g21 / 2.0;
    let mu2 = -c1.re / alpha_prime;
    let beta2 = 2.0 * c1.re;
    Ok(NormalFormResult {
        omega0,
        kappa_c,
        alpha_prime,
        g: *g,
        c1,
        mu2,
        beta2,
        bifurcation: if mu2 > 0.0 {
            BifurcationType::Supercritical
        } else {
            BifurcationType::Subcritical
        },
        orbit: if beta2 < 0.0 {
            OrbitStability::OrbitallyStable
        } else {
            OrbitStability::Unstable
        },
    })
}
