//! Window update laws of the TCP variants and the drop-probability laws of
//! the queue policies.
//!
//! A flow increases its window by `i(w)` per acknowledgement and decreases it
//! by `d(w)` per drop. Derivatives up to third order of `i` are needed by the
//! normal-form computation, so every variant supplies them in closed form.

use crate::error::{Error, Result};

/// Parameters of the Compound TCP window laws, `i(w) = alpha w^(k-1)` and
/// `d(w) = beta w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundParams {
    pub alpha: f64,
    pub k: f64,
    pub beta: f64,
}

impl CompoundParams {
    /// Reno's `1/w` increase and `w/2` decrease in Compound form.
    pub const RENO: CompoundParams = CompoundParams {
        alpha: 1.0,
        k: 0.0,
        beta: 0.5,
    };
}

impl Default for CompoundParams {
    fn default() -> Self {
        CompoundParams {
            alpha: 0.125,
            k: 0.75,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IllinoisParams {
    pub alpha_max: f64,
    pub beta_min: f64,
}

impl Default for IllinoisParams {
    fn default() -> Self {
        IllinoisParams {
            alpha_max: 10.0,
            beta_min: 0.125,
        }
    }
}

/// TCP variant together with the parameters of its window laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolSpec {
    Compound(CompoundParams),
    /// Evaluated as Compound with `(alpha, k, beta) = (1, 0, 1/2)`.
    Reno,
    Illinois(IllinoisParams),
    Africa,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec::Compound(CompoundParams::default())
    }
}

// TCP-Africa's b(w): linear in log w, 0.5 at w = 38.
const AFRICA_W_LOW: f64 = 38.0;
const AFRICA_W_HIGH: f64 = 83000.0;

impl ProtocolSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProtocolSpec::Compound(c) => {
                if !(c.alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", c.alpha)));
                }
                // k = 0 is admitted so that Reno can be expressed as a Compound special case.
                if !(0.0..1.0).contains(&c.k) {
                    return Err(Error::InvalidParameter(format!("k must lie in [0, 1), got {}", c.k)));
                }
                if !(c.beta > 0.0 && c.beta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "beta must lie in (0, 1), got {}",
                        c.beta
                    )));
                }
                Ok(())
            }
            ProtocolSpec::Reno | ProtocolSpec::Africa => Ok(()),
            ProtocolSpec::Illinois(p) => {
                if !(p.alpha_max > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha_max must be > 0, got {}",
                        p.alpha_max
                    )));
                }
                if !(p.beta_min > 0.0 && p.beta_min < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "beta_min must lie in (0, 1), got {}",
                        p.beta_min
                    )));
                }
                Ok(())
            }
        }
    }

    /// Compound-form parameters, if the variant has them.
    pub fn compound_form(&self) -> Option<CompoundParams> {
        match self {
            ProtocolSpec::Compound(c) => Some(*c),
            ProtocolSpec::Reno => Some(CompoundParams::RENO),
            _ => None,
        }
    }

    /// True when `d(w)` is linear in `w`, i.e. `d'' = 0`.
    pub fn has_linear_decrease(&self) -> bool {
        !matches!(self, ProtocolSpec::Africa)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::Compound(_) => "compound",
            ProtocolSpec::Reno => "reno",
            ProtocolSpec::Illinois(_) => "illinois",
            ProtocolSpec::Africa => "africa",
        }
    }
}

/// `order`-th derivative of the per-ack increase `i(w)`.
pub fn increase_rate(spec: &ProtocolSpec, w: f64, order: u8) -> Result<f64> {
    if order > 3 {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(w > 0.0) {
        return Err(Error::Domain {
            what: "window",
            value: w,
        });
    }
    match spec {
        ProtocolSpec::Compound(c) => Ok(power_derivative(c.alpha, c.k - 1.0, w, order)),
        ProtocolSpec::Reno => {
            let c = CompoundParams::RENO;
            Ok(power_derivative(c.alpha, c.k - 1.0, w, order))
        }
        ProtocolSpec::Illinois(p) => Ok(power_derivative(p.alpha_max, -1.0, w, order)),
        ProtocolSpec::Africa => Ok(africa_increase(w)?.derivative(order)),
    }
}

/// `order`-th derivative of the per-drop decrease `d(w)`.
pub fn decrease_rate(spec: &ProtocolSpec, w: f64, order: u8) -> Result<f64> {
    if order > 1 {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(w > 0.0) {
        return Err(Error::Domain {
            what: "window",
            value: w,
        });
    }
    let slope = match spec {
        ProtocolSpec::Compound(c) => c.beta,
        ProtocolSpec::Reno => CompoundParams::RENO.beta,
        ProtocolSpec::Illinois(p) => p.beta_min,
        ProtocolSpec::Africa => {
            let d = africa_decrease(w)?;
            return Ok(d.derivative(order));
        }
    };
    Ok(if order == 0 { slope * w } else { slope })
}

/// `d^n/dw^n (coef * w^expo)`.
fn power_derivative(coef: f64, expo: f64, w: f64, order: u8) -> f64 {
    let mut factor = coef;
    for j in 0..order {
        factor *= expo - j as f64;
    }
    factor * w.powf(expo - order as f64)
}

/// Truncated Taylor series `c0 + c1 h + c2 h^2 + c3 h^3` around a point.
#[derive(Debug, Clone, Copy)]
struct Jet([f64; 4]);

impl Jet {
    fn constant(c: f64) -> Jet {
        Jet([c, 0.0, 0.0, 0.0])
    }

    fn ln(w: f64) -> Jet {
        Jet([w.ln(), 1.0 / w, -0.5 / (w * w), 1.0 / (3.0 * w * w * w)])
    }

    fn pow(w: f64, e: f64) -> Jet {
        let mut c = [0.0; 4];
        let mut binom = 1.0;
        for (j, cj) in c.iter_mut().enumerate() {
            *cj = binom * w.powf(e - j as f64);
            binom *= (e - j as f64) / (j as f64 + 1.0);
        }
        Jet(c)
    }

    fn scale(self, s: f64) -> Jet {
        Jet(self.0.map(|c| c * s))
    }

    fn add(self, o: Jet) -> Jet {
        Jet([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
        ])
    }

    fn mul(self, o: Jet) -> Jet {
        let a = self.0;
        let b = o.0;
        let mut c = [0.0; 4];
        for n in 0..4 {
            for j in 0..=n {
                c[n] += a[j] * b[n - j];
            }
        }
        Jet(c)
    }

    fn div(self, o: Jet) -> Jet {
        let a = self.0;
        let b = o.0;
        let mut c = [0.0; 4];
        for n in 0..4 {
            let mut s = a[n];
            for j in 1..=n {
                s -= b[j] * c[n - j];
            }
            c[n] = s / b[0];
        }
        Jet(c)
    }

    fn derivative(&self, order: u8) -> f64 {
        let fact = [1.0, 1.0, 2.0, 6.0];
        self.0[order as usize] * fact[order as usize]
    }
}

fn africa_b(w: f64) -> Result<Jet> {
    let span = AFRICA_W_HIGH.ln() - AFRICA_W_LOW.ln();
    let b = Jet::ln(w)
        .add(Jet::constant(-AFRICA_W_LOW.ln()))
        .scale(-0.4 / span)
        .add(Jet::constant(0.5));
    // a(w) is singular at b = 2 and d(w) changes sign at b = 0.
    if !(b.0[0] > 0.0 && b.0[0] < 2.0) {
        return Err(Error::Domain {
            what: "africa window",
            value: w,
        });
    }
    Ok(b)
}

fn africa_increase(w: f64) -> Result<Jet> {
    let b = africa_b(w)?;
    // i(w) = a(w)/w = 0.156 w^(2 - 1.2 - 1) b / (2 - b)
    let two_minus_b = Jet::constant(2.0).add(b.scale(-1.0));
    Ok(Jet::pow(w, -0.2).scale(0.156).mul(b).div(two_minus_b))
}

fn africa_decrease(w: f64) -> Result<Jet> {
    let b = africa_b(w)?;
    Ok(Jet::pow(w, 1.0).mul(b))
}

/// RED parameters. `gamma` is the fluid-model averaging weight; it plays no
/// role in the drop law itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedParams {
    pub gamma: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub p_max: f64,
}

impl Default for RedParams {
    fn default() -> Self {
        RedParams {
            gamma: 1e-4,
            b_min: 50.0,
            b_max: 550.0,
            p_max: 0.1,
        }
    }
}

impl RedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.b_min > 0.0 && self.b_min < self.b_max) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy 0 < b_min < b_max, got {} and {}",
                self.b_min, self.b_max
            )));
        }
        if !(self.p_max > 0.0 && self.p_max < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_max must lie in (0, 1), got {}",
                self.p_max
            )));
        }
        Ok(())
    }

    /// Slope of the drop probability between the thresholds.
    pub fn rho(&self) -> f64 {
        self.p_max / (self.b_max - self.b_min)
    }

    /// Slope of the drop probability between `b_max` and `2 b_max`.
    pub fn eta(&self) -> f64 {
        (1.0 - self.p_max) / self.b_max
    }
}

/// `(rho, eta)` for the given thresholds.
pub fn red_derived_slopes(red: &RedParams) -> Result<(f64, f64)> {
    if !(red.b_max > red.b_min) {
        return Err(Error::InvalidParameter(format!(
            "b_max ({}) must exceed b_min ({})",
            red.b_max, red.b_min
        )));
    }
    Ok((red.rho(), red.eta()))
}

/// Drop probability as a function of the (average) queue length.
pub fn red_drop_probability(avg_q: f64, red: &RedParams) -> f64 {
    let p = if avg_q <= red.b_min {
        0.0
    } else if avg_q < red.b_max {
        red.rho() * (avg_q - red.b_min)
    } else if avg_q < 2.0 * red.b_max {
        red.eta() * avg_q - (1.0 - 2.0 * red.p_max)
    } else {
        1.0
    };
    p.clamp(0.0, 1.0)
}

/// Slope of [`red_drop_probability`] at `avg_q` (right derivative at the breakpoints).
pub fn red_drop_slope(avg_q: f64, red: &RedParams) -> f64 {
    if avg_q < red.b_min {
        0.0
    } else if avg_q < red.b_max {
        red.rho()
    } else if avg_q < 2.0 * red.b_max {
        red.eta()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    pub q_th: f64,
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_th >= 1.0) {
            return Err(Error::InvalidParameter(format!("q_th must be >= 1, got {}", self.q_th)));
        }
        Ok(())
    }
}

/// Per-flow network parameters of the fluid models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Per-flow service capacity, packets per second.
    pub c_per_flow: f64,
    /// Round-trip time, seconds; also the feedback delay.
    pub rtt: f64,
    /// Uniform time-scaling used as the bifurcation parameter.
    pub kappa: f64,
    /// Per-flow buffer in packets. `None` means unbounded.
    pub buffer: Option<f64>,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            c_per_flow: 100.0,
            rtt: 0.1,
            kappa: 1.0,
            buffer: None,
        }
    }
}

impl NetworkParams {
    pub fn new(c_per_flow: f64, rtt: f64) -> Self {
        NetworkParams {
            c_per_flow,
            rtt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_per_flow > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "capacity must be > 0, got {}",
                self.c_per_flow
            )));
        }
        if !(self.rtt > 0.0) {
            return Err(Error::InvalidParameter(format!("rtt must be > 0, got {}", self.rtt)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if let Some(b) = self.buffer {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("buffer must be > 0, got {b}")));
            }
        }
        Ok(())
    }

    /// Bandwidth-delay product per flow, `C̃ τ`.
    pub fn bdp(&self) -> f64 {
        self.c_per_flow * self.rtt
    }
}

/// M/M/1-style drop probability `(w / C̃τ)^q_th`, capped at 1.
pub fn threshold_drop_probability(w: f64, net: &NetworkParams, th: &ThresholdParams) -> f64 {
    let ratio = (w / net.bdp()).max(0.0);
    if ratio >= 1.0 {
        1.0
    } else {
        ratio.powf(th.q_th)
    }
}

/// `dp/dw` of [`threshold_drop_probability`]; zero on the capped branch.
pub fn threshold_drop_slope(w: f64, net: &NetworkParams, th: &ThresholdParams) -> f64 {
    let ratio = w / net.bdp();
    if !(ratio > 0.0) || ratio >= 1.0 {
        0.0
    } else {
        th.q_th * ratio.powf(th.q_th - 1.0) / net.bdp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compound() -> ProtocolSpec {
        ProtocolSpec::default()
    }

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn increase_rate_examples() {
        assert_eq!(increase_rate(&compound(), 1.0, 0).unwrap(), 0.125);
        assert_eq!(increase_rate(&ProtocolSpec::Reno, 2.0, 0).unwrap(), 0.5);

        let h = 1e-5;
        let fd = central_diff(|w| increase_rate(&compound(), w, 0).unwrap(), 8.0, h);
        let exact = increase_rate(&compound(), 8.0, 1).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6, "fd {fd} exact {exact}");
    }

    #[test]
    fn increase_rate_errors() {
        assert_eq!(
            increase_rate(&compound(), 0.0, 0),
            Err(Error::Domain {
                what: "window",
                value: 0.0
            })
        );
        assert!(matches!(increase_rate(&compound(), -1.0, 1), Err(Error::Domain { .. })));
        assert_eq!(increase_rate(&compound(), 1.0, 4), Err(Error::UnsupportedOrder(4)));
        assert_eq!(decrease_rate(&compound(), 1.0, 2), Err(Error::UnsupportedOrder(2)));
        assert!(matches!(decrease_rate(&compound(), 0.0, 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn decrease_rate_examples() {
        assert_eq!(decrease_rate(&compound(), 10.0, 0).unwrap(), 5.0);
        assert_eq!(decrease_rate(&compound(), 10.0, 1).unwrap(), 0.5);
        assert_eq!(decrease_rate(&ProtocolSpec::Reno, 10.0, 0).unwrap(), 5.0);
        assert_eq!(decrease_rate(&ProtocolSpec::Reno, 10.0, 1).unwrap(), 0.5);
        let illinois = ProtocolSpec::Illinois(IllinoisParams::default());
        assert_eq!(decrease_rate(&illinois, 8.0, 0).unwrap(), 1.0);
    }

    #[test]
    fn reno_is_compound_special_case() {
        let as_compound = ProtocolSpec::Compound(CompoundParams::RENO);
        for &w in &[0.5, 1.0, 3.7, 42.0, 999.0] {
            for order in 0..=3 {
                assert_eq!(
                    increase_rate(&ProtocolSpec::Reno, w, order).unwrap(),
                    increase_rate(&as_compound, w, order).unwrap()
                );
            }
            for order in 0..=1 {
                assert_eq!(
                    decrease_rate(&ProtocolSpec::Reno, w, order).unwrap(),
                    decrease_rate(&as_compound, w, order).unwrap()
                );
            }
        }
        assert_eq!(increase_rate(&ProtocolSpec::Reno, 4.0, 0).unwrap(), 0.25);
    }

    #[test]
    fn africa_matches_printed_formula() {
        let w = 120.0_f64;
        let b = -0.4 * (w.ln() - 38f64.ln()) / (83000f64.ln() - 38f64.ln()) + 0.5;
        let a = 0.156 * w * w * b / ((2.0 - b) * w.powf(1.2));
        let i = increase_rate(&ProtocolSpec::Africa, w, 0).unwrap();
        assert!((i - a / w).abs() < 1e-14 * i.abs());
        let d = decrease_rate(&ProtocolSpec::Africa, w, 0).unwrap();
        assert!((d - w * b).abs() < 1e-12 * d);
        // b(38) = 0.5 exactly
        let d38 = decrease_rate(&ProtocolSpec::Africa, 38.0, 0).unwrap();
        assert!((d38 - 19.0).abs() < 1e-12);
    }

    #[test]
    fn africa_domain_is_restricted() {
        assert!(matches!(
            increase_rate(&ProtocolSpec::Africa, 1e-30, 0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            decrease_rate(&ProtocolSpec::Africa, 1e12, 0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn red_drop_examples() {
        let red = RedParams::default();
        assert_eq!(red_drop_probability(50.0, &red), 0.0);
        assert!((red_drop_probability(550.0, &red) - 0.1).abs() < 1e-15);
        assert_eq!(red_drop_probability(1100.0, &red), 1.0);
        assert_eq!(red_drop_probability(0.0, &red), 0.0);
        assert_eq!(red_drop_probability(5000.0, &red), 1.0);
    }

    #[test]
    fn red_slopes() {
        let (rho, eta) = red_derived_slopes(&RedParams::default()).unwrap();
        assert!((rho - 2e-4).abs() < 1e-18);
        assert!((eta - 16.36e-4).abs() / 16.36e-4 < 0.005);
        assert!((eta - 0.9 / 550.0).abs() < 1e-18);

        let red = RedParams {
            p_max: 0.5,
            b_max: 100.0,
            b_min: 50.0,
            ..Default::default()
        };
        let (rho, eta) = red_derived_slopes(&red).unwrap();
        assert!((rho - 0.01).abs() < 1e-16);
        assert!((eta - 0.005).abs() < 1e-16);

        let bad = RedParams {
            b_max: 40.0,
            ..Default::default()
        };
        assert!(matches!(red_derived_slopes(&bad), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn threshold_drop_examples() {
        let net = NetworkParams::new(100.0, 1.0);
        let th = ThresholdParams { q_th: 39.0 };
        assert_eq!(threshold_drop_probability(100.0, &net, &th), 1.0);
        assert_eq!(threshold_drop_probability(150.0, &net, &th), 1.0);
        let lin = ThresholdParams { q_th: 1.0 };
        assert!((threshold_drop_probability(50.0, &net, &lin) - 0.5).abs() < 1e-15);

        let mut oracle = 1.0;
        for _ in 0..39 {
            oracle *= 0.8;
        }
        let p = threshold_drop_probability(80.0, &net, &th);
        assert!(((p - oracle) / oracle).abs() < 1e-8);
        assert!((p - 1.66e-4).abs() < 0.01e-4);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ProtocolSpec::Compound(CompoundParams {
            alpha: 0.0,
            ..Default::default()
        })
        .validate()
        .is_err());
        assert!(ProtocolSpec::Compound(CompoundParams {
            k: 1.0,
            ..Default::default()
        })
        .validate()
        .is_err());
        assert!(ProtocolSpec::Compound(CompoundParams {
            beta: 1.0,
            ..Default::default()
        })
        .validate()
        .is_err());
        assert!(ProtocolSpec::Illinois(IllinoisParams {
            beta_min: 0.0,
            ..Default::default()
        })
        .validate()
        .is_err());
        assert!(RedParams {
            gamma: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RedParams {
            p_max: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ThresholdParams { q_th: 0.5 }.validate().is_err());
        assert!(NetworkParams::new(0.0, 1.0).validate().is_err());
        assert!(NetworkParams {
            kappa: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
