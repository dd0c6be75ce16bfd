use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use redlab::stability::FreeParameter;
use redlab::{CompoundParams, FluidModel, FluidSystemKind, NetworkParams, ProtocolSpec};
use redlab_sim::Profile;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    WithAveraging,
    NoAveraging,
    Threshold,
}

impl SystemArg {
    pub fn kind(self) -> FluidSystemKind {
        match self {
            SystemArg::WithAveraging => FluidSystemKind::WithAveraging,
            SystemArg::NoAveraging => FluidSystemKind::NoAveraging,
            SystemArg::Threshold => FluidSystemKind::Threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Compound,
    Reno,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Desk,
    Paper,
}

impl ProfileArg {
    pub fn profile(self) -> Profile {
        match self {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

/// Fluid-model selection plus per-parameter overrides.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "with-averaging")]
    pub system: SystemArg,
    #[arg(long, value_enum, default_value = "compound")]
    pub protocol: ProtocolArg,
    /// Per-flow capacity in packets per second.
    #[arg(long, default_value_t = 100.0)]
    pub c: f64,
    /// Round-trip time in seconds.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub bmin: Option<f64>,
    #[arg(long)]
    pub bmax: Option<f64>,
    #[arg(long)]
    pub pmax: Option<f64>,
    #[arg(long)]
    pub qth: Option<f64>,
}

impl ModelArgs {
    /// Builds and validates the model. Invalid values are usage errors.
    pub fn model(&self) -> Result<FluidModel> {
        let protocol = match self.protocol {
            ProtocolArg::Compound => ProtocolSpec::Compound(CompoundParams::default()),
            ProtocolArg::Reno => ProtocolSpec::Reno,
        };
        let mut m = FluidModel::new(self.system.kind(), protocol, NetworkParams::new(self.c, self.tau));
        let overrides = [
            (FreeParameter::Kappa, self.kappa),
            (FreeParameter::Gamma, self.gamma),
            (FreeParameter::Alpha, self.alpha),
            (FreeParameter::K, self.k),
            (FreeParameter::Beta, self.beta),
            (FreeParameter::BMin, self.bmin),
            (FreeParameter::BMax, self.bmax),
            (FreeParameter::PMax, self.pmax),
            (FreeParameter::QTh, self.qth),
        ];
        for (param, value) in overrides {
            if let Some(v) = value {
                param.set(&mut m, v).map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        m.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(m)
    }
}

/// A parsed `name=start:stop:count` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: FreeParameter,
    pub values: Vec<f64>,
}

/// Parses `name=start:stop:count`. A count of 1 with `start != stop` is read
/// as a unit step, so `qth=10:100:1` gives 10, 11, ..., 100.
pub fn parse_sweep(s: &str) -> Result<Sweep> {
    let (name, range) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("sweep '{s}' is not of the form name=start:stop:count")))?;
    let param: FreeParameter = name.trim().parse().map_err(CliError::Usage)?;
    let parts: Vec<&str> = range.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(CliError::Usage(format!(
            "sweep range '{range}' is not start:stop:count"
        )));
    };
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Usage(format!("sweep bound '{v}' is not a number")))
    };
    let (start, stop) = (num(start)?, num(stop)?);
    let count: usize = count
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("sweep count '{count}' is not a positive integer")))?;
    let values = if count == 1 && start != stop {
        let n = ((stop - start).abs() + 1e-9).floor() as usize;
        let step = (stop - start).signum();
        (0..=n).map(|j| start + step * j as f64).collect()
    } else {
        redlab::stability::linspace(start, stop, count)
    };
    Ok(Sweep { param, values })
}

/// Parses `lo:hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || CliError::Usage(format!("range '{s}' is not lo:hi with 0 < lo < hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Parses a comma-separated list of positive numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0 && x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("'{v}' is not a positive number")))
        })
        .collect()
}

/// Directory that receives the `params.txt` sidecar for an output path.
pub fn sidecar_dir(out: Option<&Path>, out_is_dir: bool) -> PathBuf {
    match out {
        Some(p) if out_is_dir => p.to_path_buf(),
        Some(p) => p
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
        None => PathBuf::from("."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_counts_and_unit_steps() {
        let s = parse_sweep("c=100:500:17").unwrap();
        assert_eq!(s.param, FreeParameter::C);
        assert_eq!(s.values.len(), 17);
        assert_eq!(s.values[1], 125.0);
        assert_eq!(*s.values.last().unwrap(), 500.0);

        let s = parse_sweep("qth=10:100:1").unwrap();
        assert_eq!(s.values.len(), 91);
        assert_eq!(s.values[29], 39.0);

        let s = parse_sweep("tau=0.2:0.2:1").unwrap();
        assert_eq!(s.values, vec![0.2]);
    }

    #[test]
    fn bad_sweeps_are_usage_errors() {
        for bad in ["colour=1:2:3", "c=1:2", "c=a:2:3", "c=1:2:0", "c1:2:3"] {
            assert!(matches!(parse_sweep(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range("0.001:10").unwrap(), (0.001, 10.0));
        assert!(parse_range("5:1").is_err());
        assert_eq!(parse_list("10, 200").unwrap(), vec![10.0, 200.0]);
        assert!(parse_list("10,-1").is_err());
    }

    #[test]
    fn overrides_reach_the_model() {
        let args = ModelArgs {
            system: SystemArg::Threshold,
            protocol: ProtocolArg::Compound,
            c: 100.0,
            tau: 1.0,
            kappa: None,
            gamma: None,
            alpha: Some(0.2),
            k: None,
            beta: None,
            bmin: None,
            bmax: None,
            pmax: None,
            qth: Some(20.0),
        };
        let m = args.model().unwrap();
        assert_eq!(m.threshold.q_th, 20.0);
        assert_eq!(FreeParameter::Alpha.get(&m).unwrap(), 0.2);

        let reno = ModelArgs {
            protocol: ProtocolArg::Reno,
            ..args
        };
        assert!(matches!(reno.model(), Err(CliError::Usage(_))));
    }
}
