use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redlab::fluid::{integrate_dde, rhs, windowed_amplitudes, History};
use redlab::hopf::{
    analyse_hopf, bilinear_form, classify_hopf, collect_nonlinearity, eigen_residuals, g_coefficients,
    taylor_coefficients, Arguments, BifurcationType, Expansion, HopfAnalysis, OrbitStability, TaylorCoefficients,
};
use redlab::stability::{find_hopf_boundary, FreeParameter};
use redlab::{CompoundParams, FluidModel, FluidSystemKind, NetworkParams, ProtocolSpec, RedParams};

fn no_avg(c: f64, tau: f64) -> FluidModel {
    FluidModel::new(
        FluidSystemKind::NoAveraging,
        ProtocolSpec::default(),
        NetworkParams::new(c, tau),
    )
}

/// The model at its own Hopf delay, so that `κ_c = 1`.
fn at_hopf_point(base: FluidModel) -> FluidModel {
    let h = find_hopf_boundary(&base, FreeParameter::Tau, 0.01, 3.0, 40).unwrap();
    let mut m = base;
    m.net.rtt = h.critical_value;
    m
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

// ---- Taylor coefficients against finite differences of the RHS ----

/// Central difference of order 1..=3 in one variable, Richardson-extrapolated.
fn derivative(f: &dyn Fn(f64) -> f64, order: u32, h: f64) -> f64 {
    let d = |h: f64| match order {
        0 => f(0.0),
        1 => (f(h) - f(-h)) / (2.0 * h),
        2 => (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h),
        3 => (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h),
        _ => unreachable!(),
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Mixed partial `∂^(a+b+c) f / ∂x^a ∂r^b ∂s^c` at the origin.
fn mixed(f: &dyn Fn(f64, f64, f64) -> f64, a: u32, b: u32, c: u32, hx: f64, hr: f64, hs: f64) -> f64 {
    let in_s = |x: f64, r: f64| derivative(&|s| f(x, r, s), c, hs);
    let in_r = |x: f64| derivative(&|r| in_s(x, r), b, hr);
    derivative(&in_r, a, hx)
}

fn fd_taylor(m: &FluidModel) -> TaylorCoefficients {
    let eq = m.equilibrium().unwrap();
    let (w, q) = (eq.w_star, eq.q_star.unwrap());
    let f1 = |x: f64, r: f64, s: f64| rhs(m, &[w + x, q], &[w + r, q + s])[0];
    // u2' depends on x = u1(t) and y = u2(t); reuse the r slot for y.
    let f2 = |x: f64, y: f64, _s: f64| rhs(m, &[w + x, q + y], &[w, q])[1];
    let (hx, hr, hs) = (0.02 * w, 0.02 * w, 0.02 * (q - m.red.b_min).min(m.red.b_max - q));
    let d1 = |a, b, c| mixed(&f1, a, b, c, hx, hr, hs);
    let d2 = |a, b| mixed(&f2, a, b, 0, hx, hs, hs);
    TaylorCoefficients {
        xi_x: d1(1, 0, 0),
        xi_s: d1(0, 0, 1),
        xi_xx: d1(2, 0, 0) / 2.0,
        xi_xr: d1(1, 1, 0),
        xi_xs: d1(1, 0, 1),
        xi_rs: d1(0, 1, 1),
        xi_xxx: d1(3, 0, 0) / 6.0,
        xi_xxr: d1(2, 1, 0) / 2.0,
        xi_xxs: d1(2, 0, 1) / 2.0,
        xi_xrs: d1(1, 1, 1),
        chi_x: d2(1, 0),
        chi_y: d2(0, 1),
        chi_xy: d2(1, 1),
    }
}

fn fields(t: &TaylorCoefficients) -> [f64; 13] {
    [
        t.xi_x, t.xi_s, t.xi_xx, t.xi_xr, t.xi_xs, t.xi_rs, t.xi_xxx, t.xi_xxr, t.xi_xxs, t.xi_xrs, t.chi_x, t.chi_y,
        t.chi_xy,
    ]
}

#[test]
fn taylor_coefficients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 40 {
        let spec = ProtocolSpec::Compound(CompoundParams {
            alpha: rng.gen_range(0.05..1.0),
            k: rng.gen_range(0.0..0.95),
            beta: rng.gen_range(0.1..0.9),
        });
        let mut m = FluidModel::new(
            FluidSystemKind::NoAveraging,
            spec,
            NetworkParams::new(rng.gen_range(20.0..500.0), rng.gen_range(0.02..1.0)),
        );
        m.red = RedParams {
            b_min: rng.gen_range(5.0..100.0),
            b_max: rng.gen_range(200.0..900.0),
            p_max: rng.gen_range(0.02..0.5),
            ..RedParams::default()
        };
        let eq = m.equilibrium().unwrap();
        let q = eq.q_star.unwrap();
        // Stay inside the affine part of the drop law.
        if q - m.red.b_min < 2.0 || m.red.b_max - q < 2.0 {
            continue;
        }
        let exact = taylor_coefficients(&m, &eq).unwrap();
        let fd = fd_taylor(&m);
        for (j, (a, b)) in fields(&exact).iter().zip(fields(&fd)).enumerate() {
            assert!(
                rel_close(*a, b, 1e-4),
                "coefficient {j}: closed form {a}, finite difference {b}"
            );
        }
        checked += 1;
    }
}

#[test]
fn queue_coefficients_have_closed_forms() {
    let m = no_avg(100.0, 0.273);
    let eq = m.equilibrium().unwrap();
    let t = taylor_coefficients(&m, &eq).unwrap();
    assert_eq!(t.chi_x, (1.0 - eq.p_star) / 0.273);
    assert_eq!(t.chi_y, -m.red.rho() * eq.w_star / 0.273);
}

#[test]
fn taylor_rejects_nonlinear_decrease_and_other_systems() {
    let m = FluidModel::new(
        FluidSystemKind::NoAveraging,
        ProtocolSpec::Africa,
        NetworkParams::new(1000.0, 0.2),
    );
    if let Ok(eq) = m.equilibrium() {
        assert!(taylor_coefficients(&m, &eq).is_err());
    }
    let m = FluidModel::new(
        FluidSystemKind::WithAveraging,
        ProtocolSpec::default(),
        NetworkParams::new(100.0, 0.1),
    );
    assert!(taylor_coefficients(&m, &m.equilibrium().unwrap()).is_err());
}

// ---- Eigenvectors ----

#[test]
fn eigenvectors_are_normalised_and_exact() {
    let HopfAnalysis { taylor, eigen, .. } = analyse_hopf(&at_hopf_point(no_avg(100.0, 0.1))).unwrap();
    let (r, r_adj) = eigen_residuals(&taylor, &eigen);
    assert!(r < 1e-10 && r_adj < 1e-10, "{r} {r_adj}");
    let q = |th: f64| eigen.q(th);
    let qbar = |th: f64| eigen.q(th).map(|v| v.conj());
    let qs = |s: f64| eigen.q_adjoint(s);
    let one = bilinear_form(&taylor, eigen.kappa, eigen.tau, qs, q);
    let zero = bilinear_form(&taylor, eigen.kappa, eigen.tau, qs, qbar);
    assert!((one - 1.0).norm() < 1e-10, "<q*, q> = {one}");
    assert!(zero.norm() < 1e-10, "<q*, q̄> = {zero}");
}

// ---- Collection of the nonlinearity ----

/// Truncated series in z, z̄ up to total degree 3; `c[i][j]` multiplies z^i z̄^j.
#[derive(Clone, Copy)]
struct Series([[Complex64; 4]; 4]);

impl Series {
    fn from_expansion(e: &Expansion, w02: Complex64) -> Self {
        let mut c = [[Complex64::new(0.0, 0.0); 4]; 4];
        c[1][0] = e.z;
        c[0][1] = e.zb;
        c[2][0] = e.w20 / 2.0;
        c[1][1] = e.w11;
        c[0][2] = w02 / 2.0;
        Series(c)
    }

    fn mul(&self, o: &Series) -> Series {
        let mut c = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 - i {
                for k in 0..=i {
                    for l in 0..=j {
                        c[i][j] += self.0[k][l] * o.0[i - k][j - l];
                    }
                }
            }
        }
        Series(c)
    }

    fn scale(&self, s: f64) -> Series {
        Series(self.0.map(|row| row.map(|v| v * s)))
    }

    fn add(&self, o: &Series) -> Series {
        let mut c = self.0;
        for i in 0..4 {
            for j in 0..4 {
                c[i][j] += o.0[i][j];
            }
        }
        Series(c)
    }

    /// `F_ij = i! j! × coefficient of z^i z̄^j`.
    fn collected(&self) -> [Complex64; 4] {
        [2.0 * self.0[2][0], self.0[1][1], 2.0 * self.0[0][2], 2.0 * self.0[2][1]]
    }
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

fn random_taylor(rng: &mut ChaCha8Rng) -> TaylorCoefficients {
    let mut v = [0.0; 13];
    for x in v.iter_mut() {
        *x = rng.gen_range(-3.0..3.0);
    }
    TaylorCoefficients {
        xi_x: v[0],
        xi_s: v[1],
        xi_xx: v[2],
        xi_xr: v[3],
        xi_xs: v[4],
        xi_rs: v[5],
        xi_xxx: v[6],
        xi_xxr: v[7],
        xi_xxs: v[8],
        xi_xrs: v[9],
        chi_x: v[10],
        chi_y: v[11],
        chi_xy: v[12],
    }
}

#[test]
fn closed_form_collection_matches_series_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let t = random_taylor(&mut rng);
        let kappa = rng.gen_range(0.5..2.0);
        let mut arg = || Expansion {
            z: random_complex(&mut rng),
            zb: random_complex(&mut rng),
            w20: random_complex(&mut rng),
            w11: random_complex(&mut rng),
        };
        let a = Arguments {
            x: arg(),
            r: arg(),
            s: arg(),
            y: arg(),
        };
        let w02 = random_complex(&mut rng);
        let [x, r, s, y] = [a.x, a.r, a.s, a.y].map(|e| Series::from_expansion(&e, w02));
        let f1 = x
            .mul(&x)
            .scale(t.xi_xx)
            .add(&x.mul(&r).scale(t.xi_xr))
            .add(&x.mul(&s).scale(t.xi_xs))
            .add(&r.mul(&s).scale(t.xi_rs))
            .add(&x.mul(&x).mul(&x).scale(t.xi_xxx))
            .add(&x.mul(&x).mul(&r).scale(t.xi_xxr))
            .add(&x.mul(&x).mul(&s).scale(t.xi_xxs))
            .add(&x.mul(&r).mul(&s).scale(t.xi_xrs))
            .scale(kappa);
        let f2 = x.mul(&y).scale(t.chi_xy * kappa);
        let closed = collect_nonlinearity(&t, kappa, &a);
        for (got, want) in closed.iter().zip([f1.collected(), f2.collected()]) {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).norm() < 1e-10 * (1.0 + w.norm()), "{g} vs {w}");
            }
        }
    }
}

#[test]
fn conjugate_partner_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let c = rng.gen_range(50.0..400.0);
        let m = no_avg(c, rng.gen_range(0.05..1.0));
        let Ok(a) = analyse_hopf(&m) else { continue };
        let g = a.result.g;
        for j in 0..2 {
            assert!((g.f02[j] - g.f20[j].conj()).norm() < 1e-12 * (1.0 + g.f20[j].norm()));
        }
        // g02 is the projection of F02 with the same adjoint vector.
        let qs = a.eigen.q_adjoint(0.0);
        let g02 = qs[0].conj() * g.f02[0] + qs[1].conj() * g.f02[1];
        assert!((g02 - g.g02).norm() < 1e-12 * (1.0 + g02.norm()));
    }
}

#[test]
fn g_coefficients_are_homogeneous_in_the_quadratic_terms() {
    let m = at_hopf_point(no_avg(100.0, 0.1));
    let HopfAnalysis { taylor, eigen, .. } = analyse_hopf(&m).unwrap();
    let scaled = |lambda: f64| TaylorCoefficients {
        xi_xx: lambda * taylor.xi_xx,
        xi_xr: lambda * taylor.xi_xr,
        xi_xs: lambda * taylor.xi_xs,
        xi_rs: lambda * taylor.xi_rs,
        chi_xy: lambda * taylor.chi_xy,
        xi_xxx: 0.0,
        xi_xxr: 0.0,
        xi_xxs: 0.0,
        xi_xrs: 0.0,
        ..taylor
    };
    let g1 = g_coefficients(&scaled(1.0), &eigen).unwrap();
    let g3 = g_coefficients(&scaled(3.0), &eigen).unwrap();
    for (a, b) in [(g1.g20, g3.g20), (g1.g11, g3.g11), (g1.g02, g3.g02)] {
        assert!((3.0 * a - b).norm() < 1e-10 * b.norm());
    }
    assert!((9.0 * g1.g21 - g3.g21).norm() < 1e-10 * g3.g21.norm());
}

// ---- Classification ----

#[test]
fn default_point_is_supercritical_with_stable_orbits() {
    let m = at_hopf_point(no_avg(100.0, 0.1));
    let r = analyse_hopf(&m).unwrap().result;
    assert!((r.kappa_c - 1.0).abs() < 1e-9);
    assert!((r.omega0 - 0.99).abs() < 0.01, "omega0 = {}", r.omega0);
    assert!(r.mu2 > 0.0 && r.beta2 < 0.0);
    assert_eq!(r.bifurcation, BifurcationType::Supercritical);
    assert_eq!(r.orbit, OrbitStability::OrbitallyStable);
    assert!((r.mu2 * r.alpha_prime + r.beta2 / 2.0).abs() < 1e-10 * r.beta2.abs().max(1e-300));
    let json = r.to_json();
    for key in ["omega0", "kappa_c", "c1_re", "c1_im", "mu2", "beta2", "type", "orbit"] {
        assert!(json.contains(&format!("\"{key}\"")));
    }
}

#[test]
fn classification_holds_at_neighbouring_capacities() {
    for c in redlab::stability::linspace(90.0, 110.0, 10) {
        let r = analyse_hopf(&at_hopf_point(no_avg(c, 0.1))).unwrap().result;
        assert!(r.mu2 > 0.0 && r.beta2 < 0.0, "C = {c}");
    }
}

#[test]
fn lyapunov_coefficient_is_phase_invariant() {
    let a = analyse_hopf(&no_avg(100.0, 0.25)).unwrap();
    let base = a.result.c1;
    for angle in [std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
        let g = g_coefficients(&a.taylor, &a.eigen.rotated(angle)).unwrap();
        let r = classify_hopf(&g, a.result.omega0, a.result.kappa_c, a.result.alpha_prime).unwrap();
        assert!((r.c1 - base).norm() < 1e-10 * base.norm(), "{} vs {base}", r.c1);
    }
}

#[test]
fn degenerate_crossing_is_rejected() {
    let a = analyse_hopf(&no_avg(100.0, 0.25)).unwrap();
    assert!(classify_hopf(&a.result.g, a.result.omega0, 1.0, 0.0).is_err());
}

/// Peak-to-peak window amplitude approaches `4√(Δκ/μ2)` above the critical
/// point. `1/A²` relaxes exponentially on the slow manifold, so the limit is
/// extrapolated from three equally spaced windows.
#[test]
fn limit_cycle_amplitude_matches_normal_form() {
    let mut m = at_hopf_point(no_avg(100.0, 0.1));
    let r = analyse_hopf(&m).unwrap().result;
    let dk = 1e-4;
    m.net.kappa = r.kappa_c * (1.0 + dk);
    let predicted = 4.0 * (m.net.kappa - r.kappa_c).sqrt() / r.mu2.sqrt();
    let eq = m.equilibrium().unwrap();
    let mut x0 = m.equilibrium_state(&eq);
    x0[0] += 1.0;
    let traj = integrate_dde(&m, &History::constant(x0), 30000.0, m.net.rtt / 200.0).unwrap();
    let amps = windowed_amplitudes(&traj, 0, 0.0, 10000.0);
    let u: Vec<f64> = amps.iter().map(|a| a.powi(-2)).collect();
    let u_inf = (u[0] * u[2] - u[1] * u[1]) / (u[0] + u[2] - 2.0 * u[1]);
    let simulated = u_inf.powf(-0.5);
    assert!(
        rel_close(simulated, predicted, 0.2),
        "simulated {simulated}, predicted {predicted}"
    );
}
