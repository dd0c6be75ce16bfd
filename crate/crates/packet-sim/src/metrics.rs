//! Measured outputs of a run and the statistics derived from them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{Traffic, DEFAULT_MEASUREMENT_WINDOW};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSample {
    pub t: f64,
    pub q: u32,
    pub avg_q: f64,
    /// Time average of the occupancy over the sampling interval ending at `t`.
    pub mean_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub t: f64,
    pub flow: usize,
    pub window: f64,
}

/// Per-link counters of one sampling interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkInterval {
    pub busy: f64,
    pub queueing_delay_sum: f64,
    pub served: u64,
}

/// Counters of one sampling interval ending at `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalStats {
    pub t_end: f64,
    pub duration: f64,
    /// Packets entering their first link.
    pub injected: u64,
    pub drops: u64,
    pub delivered_bits: f64,
    pub links: Vec<LinkInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub trace: Vec<QueueSample>,
    pub arrivals: u64,
    pub departures: u64,
    pub drops: u64,
    /// Packets held when the run stopped, including one in transmission.
    pub final_occupancy: u64,
    pub max_queue: u32,
}

impl LinkMetrics {
    /// `arrivals = departures + drops + final occupancy`.
    pub fn is_conserved(&self) -> bool {
        self.arrivals == self.departures + self.drops + self.final_occupancy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub traffic: Traffic,
    pub start: f64,
    pub sized: bool,
    pub completion: Option<f64>,
    pub delivered_packets: u64,
    pub loss_events: u64,
    pub timeouts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub links: Vec<LinkMetrics>,
    pub windows: Vec<WindowSample>,
    pub intervals: Vec<IntervalStats>,
    /// Configured flows, in configuration order.
    pub flows: Vec<FlowOutcome>,
    /// Completion times of generated short transfers.
    pub short_flow_times: Vec<f64>,
    pub capacity: f64,
    pub end_time: f64,
    pub measure_from: Option<f64>,
}

/// Scalar results written to `summary.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub loss_pct: f64,
    pub throughput_mbps: f64,
    pub afct_s: Option<f64>,
    pub min_util_pct: f64,
}

/// Mean of `completion − start` over the sized configured flows.
pub fn compute_afct(metrics: &Metrics) -> Result<f64> {
    let sized: Vec<(usize, &FlowOutcome)> = metrics.flows.iter().enumerate().filter(|(_, f)| f.sized).collect();
    if sized.is_empty() {
        return Err(SimError::NoSizedFlows);
    }
    let stragglers: Vec<usize> = sized
        .iter()
        .filter(|(_, f)| f.completion.is_none())
        .map(|(i, _)| *i)
        .collect();
    if !stragglers.is_empty() {
        return Err(SimError::Incomplete { stragglers });
    }
    let total: f64 = sized.iter().map(|(_, f)| f.completion.unwrap() - f.start).sum();
    Ok(total / sized.len() as f64)
}

impl Metrics {
    /// Start of the post-transient window.
    pub fn measurement_start(&self) -> f64 {
        match self.measure_from {
            Some(t) if t < self.end_time => t,
            Some(_) => 0.0,
            None => self.end_time - DEFAULT_MEASUREMENT_WINDOW.min(self.end_time / 2.0),
        }
    }

    fn window_intervals(&self) -> impl Iterator<Item = &IntervalStats> {
        let from = self.measurement_start();
        self.intervals
            .iter()
            .filter(move |s| s.t_end - s.duration >= from - 1e-9)
    }

    fn window_trace(&self, link: usize) -> impl Iterator<Item = &QueueSample> {
        let from = self.measurement_start();
        self.links[link].trace.iter().filter(move |s| s.t >= from)
    }

    /// Utilisation of `link` per sampling interval, percent.
    pub fn utilization_series(&self, link: usize) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .map(|s| (s.t_end, 100.0 * s.links[link].busy / s.duration))
            .collect()
    }

    pub fn mean_utilization(&self, link: usize) -> f64 {
        let (busy, time) = self
            .window_intervals()
            .fold((0.0, 0.0), |(b, t), s| (b + s.links[link].busy, t + s.duration));
        if time > 0.0 {
            100.0 * busy / time
        } else {
            0.0
        }
    }

    /// Lowest per-interval utilisation of any link in the window.
    pub fn min_utilization(&self) -> f64 {
        self.window_intervals()
            .flat_map(|s| s.links.iter().map(move |l| 100.0 * l.busy / s.duration))
            .fold(f64::INFINITY, f64::min)
    }

    /// Range of the interval-averaged queue over the measurement window.
    /// Averaging over each sampling interval keeps packet-scale jitter out
    /// of the oscillation amplitude.
    pub fn queue_peak_to_peak(&self, link: usize) -> f64 {
        let (lo, hi) = self
            .window_trace(link)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.mean_q), hi.max(s.mean_q))
            });
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// Range of the sampled instantaneous queue over the measurement window.
    pub fn instantaneous_peak_to_peak(&self, link: usize) -> f64 {
        let (lo, hi) = self
            .window_trace(link)
            .fold((u32::MAX, 0), |(lo, hi), s| (lo.min(s.q), hi.max(s.q)));
        if hi >= lo {
            (hi - lo) as f64
        } else {
            0.0
        }
    }

    pub fn mean_queue(&self, link: usize) -> f64 {
        let (sum, n) = self
            .window_trace(link)
            .fold((0.0, 0), |(s, n), x| (s + x.q as f64, n + 1));
        if n > 0 {
            sum / n as f64
        } else {
            0.0
        }
    }

    /// Fraction of window samples with the average queue in `[lo, hi]`.
    pub fn average_in_band(&self, link: usize, lo: f64, hi: f64) -> f64 {
        let (inside, n) = self.window_trace(link).fold((0, 0), |(i, n), s| {
            (i + usize::from(s.avg_q >= lo && s.avg_q <= hi), n + 1)
        });
        if n > 0 {
            inside as f64 / n as f64
        } else {
            0.0
        }
    }

    /// Mean wait before transmission, summed over links, seconds.
    pub fn mean_queueing_delay(&self) -> f64 {
        (0..self.links.len())
            .map(|l| {
                let (sum, n) = self.window_intervals().fold((0.0, 0), |(d, n), s| {
                    (d + s.links[l].queueing_delay_sum, n + s.links[l].served)
                });
                if n > 0 {
                    sum / n as f64
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Dropped packets as a percentage of packets entering the network.
    pub fn loss_pct(&self) -> f64 {
        let (drops, injected) = self
            .window_intervals()
            .fold((0, 0), |(d, i), s| (d + s.drops, i + s.injected));
        if injected > 0 {
            100.0 * drops as f64 / injected as f64
        } else {
            0.0
        }
    }

    /// Bits delivered to receivers per second of the window.
    pub fn throughput_bps(&self) -> f64 {
        let (bits, time) = self
            .window_intervals()
            .fold((0.0, 0.0), |(b, t), s| (b + s.delivered_bits, t + s.duration));
        if time > 0.0 {
            bits / time
        } else {
            0.0
        }
    }

    pub fn max_queue(&self) -> u32 {
        self.links.iter().map(|l| l.max_queue).max().unwrap_or(0)
    }

    pub fn drops(&self) -> u64 {
        self.links.iter().map(|l| l.drops).sum()
    }

    /// Circular standard deviation, in radians, of the phases of the flows'
    /// windows at the dominant frequency of their sum. Small values mean
    /// the sawtooths rise and fall together. `None` without oscillation.
    pub fn synchronization_index(&self) -> Option<f64> {
        let from = self.measurement_start();
        let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); self.flows.len()];
        for s in self.windows.iter().filter(|s| s.t >= from) {
            series[s.flow].push((s.t, s.window));
        }
        let len = series.iter().map(Vec::len).max()?;
        let series: Vec<Vec<(f64, f64)>> = series.into_iter().filter(|s| s.len() == len && len >= 8).collect();
        if series.len() < 2 {
            return None;
        }
        let centred: Vec<Vec<f64>> = series
            .iter()
            .map(|s| {
                let mean = s.iter().map(|x| x.1).sum::<f64>() / len as f64;
                s.iter().map(|x| x.1 - mean).collect()
            })
            .collect();
        let times: Vec<f64> = series[0].iter().map(|x| x.0).collect();
        let span = times[len - 1] - times[0];
        let coefficient = |x: &[f64], freq: f64| {
            x.iter().zip(&times).fold((0.0, 0.0), |(re, im), (v, t)| {
                let a = 2.0 * std::f64::consts::PI * freq * t;
                (re + v * a.cos(), im - v * a.sin())
            })
        };
        let total: Vec<f64> = (0..len).map(|n| centred.iter().map(|c| c[n]).sum()).collect();
        let spectrum = |f: f64| {
            let (re, im) = coefficient(&total, f);
            re * re + im * im
        };
        let (mut best, mut power) = (0.0, 0.0);
        for k in 1..len / 2 {
            let f = k as f64 / span;
            let p = spectrum(f);
            if p > power {
                power = p;
                best = f;
            }
        }
        if !(power > 0.0) {
            return None;
        }
        // Off-grid peaks leak; refine around the coarse bin.
        let coarse = best;
        for j in -16..=16 {
            let f = coarse + j as f64 / (16.0 * span);
            let p = spectrum(f);
            if f > 0.0 && p > power {
                power = p;
                best = f;
            }
        }
        let (mut c, mut s) = (0.0, 0.0);
        for x in &centred {
            let (re, im) = coefficient(x, best);
            let phase = im.atan2(re);
            c += phase.cos();
            s += phase.sin();
        }
        let r = (c * c + s * s).sqrt() / centred.len() as f64;
        Some((-2.0 * r.max(1e-300).ln()).sqrt())
    }

    pub fn summary(&self) -> Summary {
        Summary {
            loss_pct: self.loss_pct(),
            throughput_mbps: self.throughput_bps() / 1e6,
            afct_s: compute_afct(self).ok(),
            min_util_pct: self.min_utilization(),
        }
    }

    pub fn queue_csv(&self, link: usize) -> String {
        let mut out = String::from("t,q,avg_q\n");
        for s in &self.links[link].trace {
            let _ = writeln!(out, "{},{},{}", s.t, s.q, s.avg_q);
        }
        out
    }

    pub fn flows_csv(&self) -> String {
        let mut out = String::from("t,flow_id,window\n");
        for s in &self.windows {
            let _ = writeln!(out, "{},{},{}", s.t, s.flow, s.window);
        }
        out
    }

    /// Utilisation of the first link; other links go to their own files.
    pub fn util_csv(&self, link: usize) -> String {
        let mut out = String::from("t,utilization_pct\n");
        for (t, u) in self.utilization_series(link) {
            let _ = writeln!(out, "{t},{u}");
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let s = self.summary();
        let afct = s.afct_s.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "loss_pct,throughput_mbps,afct_s,min_util_pct\n{},{},{},{}\n",
            s.loss_pct, s.throughput_mbps, afct, s.min_util_pct
        )
    }

    /// Writes `queue.csv`, `flows.csv`, `util.csv` and `summary.csv` into
    /// `dir`. Links after the first get `queue_link<n>.csv` and
    /// `util_link<n>.csv`, numbered from 2.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        let write = |name: String, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| SimError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        fs::create_dir_all(dir).map_err(|e| SimError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        write("queue.csv".into(), self.queue_csv(0))?;
        write("util.csv".into(), self.util_csv(0))?;
        for l in 1..self.links.len() {
            write(format!("queue_link{}.csv", l + 1), self.queue_csv(l))?;
            write(format!("util_link{}.csv", l + 1), self.util_csv(l))?;
        }
        write("flows.csv".into(), self.flows_csv())?;
        write("summary.csv".into(), self.summary_csv())
    }
}
