use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::Result;
use crate::fluid::FluidModel;
use crate::stability::boundary::{find_hopf_boundary, solve_hopf_boundary, FreeParameter, HopfPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub x_value: f64,
    pub point: std::result::Result<HopfPoint, crate::error::Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityChart {
    pub x_param: FreeParameter,
    pub y_param: FreeParameter,
    pub points: Vec<ChartPoint>,
}

/// Search range for the solved parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRange {
    pub lo: f64,
    pub hi: f64,
    /// Log-spaced samples used to find the first stability change.
    pub samples: usize,
}

/// Evenly spaced `count` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|j| start + (stop - start) * j as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Traces the boundary sequentially: each point's bracket is seeded from the
/// previous solution and widened to the full range only when that fails.
pub fn trace_stability_chart(
    base: &FluidModel,
    x_param: FreeParameter,
    xs: &[f64],
    y_param: FreeParameter,
    range: SolveRange,
) -> StabilityChart {
    let mut points = Vec::with_capacity(xs.len());
    let mut prev: Option<f64> = None;
    for &x in xs {
        let point = (|| -> Result<HopfPoint> {
            let mut m = *base;
            x_param.set(&mut m, x)?;
            if let Some(y0) = prev {
                let (lo, hi) = ((y0 / 1.5).max(range.lo), (y0 * 1.5).min(range.hi));
                if let Ok(p) = solve_hopf_boundary(&m, y_param, lo, hi) {
                    return Ok(p);
                }
            }
            find_hopf_boundary(&m, y_param, range.lo, range.hi, range.samples)
        })();
        prev = point.as_ref().ok().map(|p| p.critical_value).or(prev);
        points.push(ChartPoint { x_value: x, point });
    }
    StabilityChart {
        x_param,
        y_param,
        points,
    }
}

/// Same chart with every point bracketed independently over the full range,
/// evaluated in parallel and merged in input order.
pub fn trace_stability_chart_parallel(
    base: &FluidModel,
    x_param: FreeParameter,
    xs: &[f64],
    y_param: FreeParameter,
    range: SolveRange,
) -> StabilityChart {
    let points = xs
        .par_iter()
        .map(|&x| {
            let point = (|| {
                let mut m = *base;
                x_param.set(&mut m, x)?;
                find_hopf_boundary(&m, y_param, range.lo, range.hi, range.samples)
            })();
            ChartPoint { x_value: x, point }
        })
        .collect();
    StabilityChart {
        x_param,
        y_param,
        points,
    }
}

impl StabilityChart {
    /// CSV with failed points written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_param,x_value,y_param,y_critical,omega,residual,transversality\n");
        for p in &self.points {
            let (y, om, res, tr) = match &p.point {
                Ok(h) => (h.critical_value, h.omega, h.residual, h.transversality),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            let _ = writeln!(
                out,
                "{},{:.11e},{},{:.11e},{:.11e},{:.11e},{:.11e}",
                self.x_param, p.x_value, self.y_param, y, om, res, tr
            );
        }
        out
    }
}
