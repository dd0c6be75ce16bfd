use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use redlab::fluid::{diagram_csv, integrate, oscillation_metrics, DiagramOptions, History, IntegrationOptions};
use redlab::hopf::analyse_hopf;
use redlab::stability::{stability_verdict, trace_stability_chart, FreeParameter, SolveRange};
use redlab::{FluidModel, RedParams};
use redlab_sim::{
    compute_afct, format_scenario, parse_scenario, run_simulation, Metrics, Profile, QueuePolicy, SimConfig,
};

use crate::args::{parse_list, parse_range, parse_sweep, sidecar_dir, ModelArgs, ProfileArg};
use crate::error::{CliError, Result};

pub struct Context {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub profile: ProfileArg,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    /// Writes `text` to `--out`, or to stdout without one.
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Writes `params.txt` under the paper profile.
    fn sidecar(&self, out_is_dir: bool, command: &str, model: Option<&FluidModel>, extra: &str) -> Result<()> {
        if self.profile != ProfileArg::Paper {
            return Ok(());
        }
        let dir = sidecar_dir(self.out.as_deref(), out_is_dir);
        let mut text = String::new();
        let _ = writeln!(text, "command = {command}");
        let _ = writeln!(text, "profile = paper");
        let _ = writeln!(text, "seed = {}", self.seed());
        if let Some(m) = model {
            let _ = writeln!(text, "system = {}", m.kind.name());
            for p in FreeParameter::ALL {
                if let Ok(v) = p.get(m) {
                    let _ = writeln!(text, "{p} = {v}");
                }
            }
        }
        let profile = Profile::Paper;
        let _ = writeln!(text, "packet.flows = {}", profile.flows());
        let _ = writeln!(text, "packet.capacity_mbps = {}", profile.capacity() / 1e6);
        let _ = writeln!(text, "packet.duration_s = {}", profile.duration());
        text.push_str(extra);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        write_file(&dir.join("params.txt"), &text)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn equilibrium(ctx: &Context, args: &ModelArgs) -> Result<()> {
    let m = args.model()?;
    let eq = m.equilibrium()?;
    let verdict = stability_verdict(&m, &eq)?;
    let mut text = String::new();
    let _ = writeln!(text, "system = {}", m.kind.name());
    let _ = writeln!(text, "w_star = {:.12e}", eq.w_star);
    match eq.q_star {
        Some(q) => {
            let _ = writeln!(text, "q_star = {q:.12e}");
        }
        None => {
            let _ = writeln!(text, "q_star = none");
        }
    }
    let _ = writeln!(text, "p_star = {:.12e}", eq.p_star);
    let _ = writeln!(text, "residual = {:.3e}", eq.residual);
    if let Some(w) = &eq.warning {
        let _ = writeln!(text, "warning = {w}");
    }
    let _ = writeln!(text, "stable = {}", verdict.stable);
    let _ = writeln!(text, "margin = {:.6e}", verdict.margin);
    let _ = writeln!(text, "condition = {:?}", verdict.condition);
    ctx.emit(&text)?;
    ctx.sidecar(false, "equilibrium", Some(&m), "")
}

pub fn stability_chart(
    ctx: &Context,
    args: &ModelArgs,
    sweep: &str,
    solve: &str,
    range: &str,
    samples: usize,
) -> Result<()> {
    let base = args.model()?;
    let sweep = parse_sweep(sweep)?;
    let y: FreeParameter = solve.parse().map_err(CliError::Usage)?;
    if y == sweep.param {
        return Err(CliError::Usage(format!("cannot sweep and solve for '{y}' at once")));
    }
    let (lo, hi) = parse_range(range)?;
    let chart = trace_stability_chart(&base, sweep.param, &sweep.values, y, SolveRange { lo, hi, samples });
    let mut solved = 0;
    for p in &chart.points {
        match &p.point {
            Ok(_) => solved += 1,
            Err(e) => eprintln!("redlab: {}={}: {e}", sweep.param, p.x_value),
        }
    }
    ctx.emit(&chart.to_csv())?;
    ctx.sidecar(
        false,
        "stability-chart",
        Some(&base),
        &format!("sweep = {}\nsolve = {y}\n", sweep.param),
    )?;
    if solved == 0 {
        return Err(CliError::Numerical(
            "no point of the sweep has a stability boundary in range".into(),
        ));
    }
    Ok(())
}

pub fn hopf_classify(ctx: &Context, args: &ModelArgs) -> Result<()> {
    let m = args.model()?;
    let analysis = analyse_hopf(&m)?;
    let mut json: serde_json::Value = serde_json::from_str(&analysis.result.to_json())
        .map_err(|e| CliError::Numerical(format!("classification is not valid JSON: {e}")))?;
    if let Some(obj) = json.as_object_mut() {
        obj.insert("system".into(), m.kind.name().into());
        obj.insert("c".into(), m.net.c_per_flow.into());
        obj.insert("tau".into(), m.net.rtt.into());
        obj.insert("alpha_prime".into(), analysis.result.alpha_prime.into());
    }
    let text = serde_json::to_string_pretty(&json).expect("JSON values serialize") + "\n";
    ctx.emit(&text)?;
    ctx.sidecar(false, "hopf-classify", Some(&m), "")
}

pub fn fluid_sim(
    ctx: &Context,
    args: &ModelArgs,
    horizon_delays: f64,
    steps_per_delay: usize,
    record_every: usize,
    perturbation: f64,
) -> Result<()> {
    if !(horizon_delays > 0.0) {
        return Err(CliError::Usage(format!(
            "horizon must be positive, got {horizon_delays}"
        )));
    }
    let m = args.model()?;
    let eq = m.equilibrium()?;
    let start: Vec<f64> = m
        .equilibrium_state(&eq)
        .iter()
        .map(|v| v * (1.0 + perturbation))
        .collect();
    let tau = m.net.rtt;
    let traj = integrate(
        &m,
        &History::constant(start),
        horizon_delays * tau,
        IntegrationOptions {
            steps_per_delay,
            record_every,
        },
    )?;
    ctx.emit(&traj.to_csv())?;
    if ctx.out.is_some() {
        println!("w_star = {:.6e}", eq.w_star);
        // Statistics need 50 delays after the cut; shorter runs skip them.
        if horizon_delays >= 100.0 {
            let om = oscillation_metrics(&traj, (horizon_delays - 100.0) * tau)?;
            println!("w_min = {:.6e}", om.min);
            println!("w_max = {:.6e}", om.max);
            println!("amplitude = {:.6e}", om.amplitude);
            match om.period {
                Some(p) => println!("period = {p:.6e}"),
                None => println!("period = none"),
            }
        }
    }
    ctx.sidecar(false, "fluid-sim", Some(&m), "")
}

pub fn bifurcation_diagram(ctx: &Context, args: &ModelArgs, sweep: &str, opts: DiagramOptions) -> Result<()> {
    let base = args.model()?;
    let sweep = parse_sweep(sweep)?;
    if !(opts.horizon_delays - opts.transient_delays >= 50.0) {
        return Err(CliError::Usage(
            "the horizon must exceed the transient by at least 50 delays".into(),
        ));
    }
    let points = redlab::fluid::bifurcation_diagram(&base, sweep.param, &sweep.values, opts);
    let mut ok = 0;
    for p in &points {
        match &p.metrics {
            Ok(_) => ok += 1,
            Err(e) => eprintln!("redlab: {}={}: {e}", sweep.param, p.value),
        }
    }
    ctx.emit(&diagram_csv(sweep.param, &points))?;
    ctx.sidecar(
        false,
        "bifurcation-diagram",
        Some(&base),
        &format!("sweep = {}\n", sweep.param),
    )?;
    if ok == 0 {
        return Err(CliError::Numerical("every point of the sweep failed".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Red,
    Threshold,
    Droptail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrafficArg {
    /// Long-lived Compound flows only.
    Homogeneous,
    /// Compound, CUBIC, UDP and short flows.
    Mixed,
}

#[derive(Debug, Clone, Args)]
pub struct PacketArgs {
    /// Scenario file of `key = value` lines; other scenario options are then ignored.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    pub rtt_ms: f64,
    #[arg(long, value_enum, default_value = "red")]
    pub policy: PolicyArg,
    #[arg(long, value_enum, default_value = "homogeneous")]
    pub traffic: TrafficArg,
    #[arg(long, default_value_t = 50.0)]
    pub bmin: f64,
    #[arg(long, default_value_t = 100.0)]
    pub bmax: f64,
    #[arg(long, default_value_t = 0.1)]
    pub pmax: f64,
    /// EWMA weight of the RED average.
    #[arg(long, default_value_t = QueuePolicy::DEFAULT_W_Q)]
    pub wq: f64,
    #[arg(long, default_value_t = 15)]
    pub qth: u32,
    /// Simulated seconds; defaults to the profile's length.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Makes every TCP flow a transfer of this many bytes.
    #[arg(long)]
    pub flow_bytes: Option<u64>,
}

fn red_policy(bmin: f64, bmax: f64, pmax: f64, w_q: f64) -> QueuePolicy {
    QueuePolicy::Red {
        params: RedParams {
            b_min: bmin,
            b_max: bmax,
            p_max: pmax,
            ..RedParams::default()
        },
        w_q,
    }
}

fn make_sized(cfg: &mut SimConfig, bytes: u64) {
    for f in cfg.flows.iter_mut().filter(|f| f.protocol.is_tcp()) {
        f.bytes_to_send = Some(bytes);
    }
}

fn packet_config(ctx: &Context, a: &PacketArgs) -> Result<SimConfig> {
    if let Some(path) = &a.scenario {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = parse_scenario(&text)?;
        if let Some(seed) = ctx.seed {
            cfg.seed = seed;
        }
        return Ok(cfg);
    }
    let policy = match a.policy {
        PolicyArg::Red => red_policy(a.bmin, a.bmax, a.pmax, a.wq),
        PolicyArg::Threshold => QueuePolicy::Threshold { q_th: a.qth },
        PolicyArg::Droptail => QueuePolicy::DropTail,
    };
    let profile = ctx.profile.profile();
    let rtt = a.rtt_ms / 1e3;
    let mut cfg = match a.traffic {
        TrafficArg::Homogeneous => profile.config(rtt, policy, ctx.seed()),
        TrafficArg::Mixed => profile.mixed_config(rtt, policy, ctx.seed()),
    };
    if let Some(d) = a.duration {
        cfg.duration = d;
    }
    if let Some(b) = a.flow_bytes {
        make_sized(&mut cfg, b);
        cfg.measure_from = Some(0.0);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary_lines(m: &Metrics) -> String {
    let s = m.summary();
    let mut text = String::new();
    let _ = writeln!(text, "loss_pct = {:.4}", s.loss_pct);
    let _ = writeln!(text, "throughput_mbps = {:.4}", s.throughput_mbps);
    let _ = writeln!(text, "mean_utilization_pct = {:.4}", m.mean_utilization(0));
    let _ = writeln!(text, "min_util_pct = {:.4}", s.min_util_pct);
    let _ = writeln!(text, "mean_queueing_delay_ms = {:.4}", m.mean_queueing_delay() * 1e3);
    let _ = writeln!(text, "queue_peak_to_peak = {:.2}", m.queue_peak_to_peak(0));
    let _ = writeln!(text, "max_queue = {}", m.max_queue());
    if let Some(a) = s.afct_s {
        let _ = writeln!(text, "afct_s = {a:.4}");
    }
    if let Some(sync) = m.synchronization_index() {
        let _ = writeln!(text, "synchronization_index = {sync:.4}");
    }
    text
}

pub fn packet_sim(ctx: &Context, a: &PacketArgs) -> Result<()> {
    let cfg = packet_config(ctx, a)?;
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("packet-sim-out"));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let m = run_simulation(&cfg)?;
    m.write_csvs(&dir)?;
    write_file(&dir.join("scenario.txt"), &format_scenario(&cfg))?;
    print!("{}", summary_lines(&m));
    ctx.sidecar(true, "packet-sim", None, &format_scenario(&cfg))
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Comma-separated round-trip times in milliseconds.
    #[arg(long, default_value = "10,200")]
    pub rtt_ms: String,
    #[arg(long, default_value_t = 15)]
    pub qth: u32,
    /// RED thresholds matched to the threshold policy.
    #[arg(long, default_value_t = 8.0)]
    pub bmin: f64,
    #[arg(long, default_value_t = 15.0)]
    pub bmax: f64,
    #[arg(long, default_value_t = 0.1)]
    pub pmax: f64,
    #[arg(long, default_value_t = QueuePolicy::DEFAULT_W_Q)]
    pub wq: f64,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long, default_value_t = 3)]
    pub runs: u64,
    /// Transfer size for the completion-time runs.
    #[arg(long, default_value_t = 50_000_000)]
    pub flow_bytes: u64,
    /// Upper limit on the length of a completion-time run, seconds.
    #[arg(long, default_value_t = 2000.0)]
    pub max_duration: f64,
}

/// One row of `compare-policies`.
struct Comparison {
    rtt_ms: f64,
    policy: &'static str,
    seed: u64,
    afct_s: f64,
    delay_ms: f64,
    loss_pct: f64,
    throughput_mbps: f64,
    min_util_pct: f64,
    max_queue: u32,
}

pub fn compare_policies(ctx: &Context, a: &CompareArgs) -> Result<()> {
    let rtts = parse_list(&a.rtt_ms)?;
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let profile = ctx.profile.profile();
    let policies = [
        ("threshold", QueuePolicy::Threshold { q_th: a.qth }),
        ("red", red_policy(a.bmin, a.bmax, a.pmax, a.wq)),
    ];
    let mut jobs = Vec::new();
    for &rtt_ms in &rtts {
        for &(name, policy) in &policies {
            for seed in ctx.seed()..ctx.seed() + a.runs {
                jobs.push((rtt_ms, name, policy, seed));
            }
        }
    }
    let rows: Vec<Comparison> = jobs
        .par_iter()
        .map(|&(rtt_ms, policy_name, policy, seed)| -> Result<Comparison> {
            let long = profile.config(rtt_ms / 1e3, policy, seed);
            long.validate()?;
            let mut sized = long.clone();
            make_sized(&mut sized, a.flow_bytes);
            sized.duration = a.max_duration;
            sized.measure_from = Some(0.0);
            let ml = run_simulation(&long)?;
            let ms = run_simulation(&sized)?;
            let s = ml.summary();
            Ok(Comparison {
                rtt_ms,
                policy: policy_name,
                seed,
                afct_s: compute_afct(&ms)?,
                delay_ms: ml.mean_queueing_delay() * 1e3,
                loss_pct: s.loss_pct,
                throughput_mbps: s.throughput_mbps,
                min_util_pct: s.min_util_pct,
                max_queue: ml.max_queue().max(ms.max_queue()),
            })
        })
        .collect::<Result<_>>()?;

    let mut csv =
        String::from("rtt_ms,policy,seed,afct_s,mean_delay_ms,loss_pct,throughput_mbps,min_util_pct,max_queue\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.rtt_ms,
            r.policy,
            r.seed,
            r.afct_s,
            r.delay_ms,
            r.loss_pct,
            r.throughput_mbps,
            r.min_util_pct,
            r.max_queue
        );
    }
    ctx.emit(&csv)?;
    if ctx.out.is_some() {
        for &rtt_ms in &rtts {
            for (name, _) in &policies {
                let sel: Vec<&Comparison> = rows
                    .iter()
                    .filter(|r| r.rtt_ms == rtt_ms && r.policy == *name)
                    .collect();
                let n = sel.len() as f64;
                println!(
                    "rtt_ms = {rtt_ms} policy = {name} afct_s = {:.3} mean_delay_ms = {:.3} max_queue = {}",
                    sel.iter().map(|r| r.afct_s).sum::<f64>() / n,
                    sel.iter().map(|r| r.delay_ms).sum::<f64>() / n,
                    sel.iter().map(|r| r.max_queue).max().unwrap_or(0)
                );
            }
        }
    }
    let extra = format!(
        "compare.rtt_ms = {}\ncompare.qth = {}\ncompare.red = {}:{}:{}:{}\ncompare.runs = {}\ncompare.flow_bytes = {}\n",
        a.rtt_ms, a.qth, a.bmin, a.bmax, a.pmax, a.wq, a.runs, a.flow_bytes
    );
    ctx.sidecar(false, "compare-policies", None, &extra)
}
