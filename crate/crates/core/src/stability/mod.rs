//! Local stability of the linearised fluid systems: characteristic
//! coefficients, crossover frequencies, stability conditions, transversality
//! and tracing of the stability boundary.

mod boundary;
mod chart;
mod coefficients;
pub mod crossover;
pub mod roots;
mod transversality;
mod verdict;

pub use boundary::{find_hopf_boundary, model_phase_residual, solve_hopf_boundary, FreeParameter, HopfPoint};
pub use chart::{
    linspace, trace_stability_chart, trace_stability_chart_parallel, ChartPoint, SolveRange, StabilityChart,
};
pub use coefficients::{compound_coefficients, linear_coefficients, raw_coefficients, CharCoefficients};
pub use crossover::{crossover_frequency, cubic_positive_root_count, Crossover};
pub use roots::{char_residual, count_rhp_roots, cubic_roots};
pub use transversality::{transversality, Transversality};
pub use verdict::{
    stability_no_averaging, stability_threshold, stability_verdict, sufficient_stable_with_averaging, ParameterForm,
    StabilityCondition, StabilityVerdict, SufficientReport, ThresholdReport,
};
