//! Flat `key = value` scenario files.
//!
//! ```text
//! topology = dumbbell
//! capacity_mbps = 25
//! policy = red
//! red.bmin = 50
//! red.bmax = 100
//! flow.0.protocol = compound
//! flow.0.rtt_ms = 100
//! ```
//!
//! Keys not given fall back to the desk profile; flow keys fall back to the
//! values of a desk-profile flow. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use redlab::RedParams;

use crate::config::{bdp_buffer, Profile, QueuePolicy, SimConfig, Topology, Traffic};
use crate::error::{Result, SimError};

pub const KEYS: [&str; 13] = [
    "topology",
    "capacity_mbps",
    "buffer_pkts",
    "packet_bytes",
    "duration_s",
    "sample_interval_s",
    "seed",
    "policy",
    "red.bmin",
    "red.bmax",
    "red.pmax",
    "red.wq",
    "threshold.qth",
];

pub const FLOW_KEYS: [&str; 5] = ["protocol", "access_mbps", "rtt_ms", "start_s", "bytes"];

fn err(line: usize, message: impl Into<String>) -> SimError {
    SimError::Scenario {
        line,
        message: message.into(),
    }
}

fn number(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, format!("{key}: '{value}' is not a number")))
}

fn integer(line: usize, key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| err(line, format!("{key}: '{value}' is not a non-negative integer")))
}

pub fn parse_scenario(text: &str) -> Result<SimConfig> {
    let mut globals: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut flows: BTreeMap<usize, BTreeMap<&str, (usize, &str)>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(rest) = key.strip_prefix("flow.") {
            let (index, field) = rest
                .split_once('.')
                .ok_or_else(|| err(line, format!("unknown key '{key}'")))?;
            let index: usize = index
                .parse()
                .map_err(|_| err(line, format!("flow index in '{key}' is not an integer")))?;
            if !FLOW_KEYS.contains(&field) {
                return Err(err(line, format!("unknown key '{key}'")));
            }
            if flows.entry(index).or_default().insert(field, (line, value)).is_some() {
                return Err(err(line, format!("duplicate key '{key}'")));
            }
        } else if KEYS.contains(&key) {
            if globals.insert(key, (line, value)).is_some() {
                return Err(err(line, format!("duplicate key '{key}'")));
            }
        } else {
            return Err(err(line, format!("unknown key '{key}'")));
        }
    }

    let mut cfg = Profile::Desk.config(0.1, QueuePolicy::red(50.0, 100.0), 1);
    let template = cfg.flows[0];
    let get = |k: &str| globals.get(k).copied();
    if let Some((line, v)) = get("topology") {
        cfg.topology = match v {
            "dumbbell" => Topology::Dumbbell,
            "parking-lot" => Topology::ParkingLot,
            other => return Err(err(line, format!("unknown topology '{other}'"))),
        };
    }
    if let Some((line, v)) = get("capacity_mbps") {
        cfg.bottleneck_capacity = number(line, "capacity_mbps", v)? * 1e6;
    }
    if let Some((line, v)) = get("packet_bytes") {
        cfg.packet_size =
            u32::try_from(integer(line, "packet_bytes", v)?).map_err(|_| err(line, "packet_bytes is too large"))?;
    }
    cfg.buffer = match get("buffer_pkts") {
        Some((line, v)) => {
            u32::try_from(integer(line, "buffer_pkts", v)?).map_err(|_| err(line, "buffer_pkts is too large"))?
        }
        None => bdp_buffer(cfg.bottleneck_capacity, cfg.packet_size.max(1)),
    };
    if let Some((line, v)) = get("duration_s") {
        cfg.duration = number(line, "duration_s", v)?;
    }
    if let Some((line, v)) = get("sample_interval_s") {
        cfg.sample_interval = number(line, "sample_interval_s", v)?;
    }
    if let Some((line, v)) = get("seed") {
        cfg.seed = integer(line, "seed", v)?;
    }

    let mut red = RedParams {
        b_min: 50.0,
        b_max: 100.0,
        ..RedParams::default()
    };
    let mut w_q = QueuePolicy::DEFAULT_W_Q;
    let mut q_th = 15;
    if let Some((line, v)) = get("red.bmin") {
        red.b_min = number(line, "red.bmin", v)?;
    }
    if let Some((line, v)) = get("red.bmax") {
        red.b_max = number(line, "red.bmax", v)?;
    }
    if let Some((line, v)) = get("red.pmax") {
        red.p_max = number(line, "red.pmax", v)?;
    }
    if let Some((line, v)) = get("red.wq") {
        w_q = number(line, "red.wq", v)?;
    }
    if let Some((line, v)) = get("threshold.qth") {
        q_th =
            u32::try_from(integer(line, "threshold.qth", v)?).map_err(|_| err(line, "threshold.qth is too large"))?;
    }
    cfg.queue_policy = match get("policy") {
        None => QueuePolicy::Red { params: red, w_q },
        Some((line, v)) => match v {
            "red" => QueuePolicy::Red { params: red, w_q },
            "threshold" => QueuePolicy::Threshold { q_th },
            "droptail" => QueuePolicy::DropTail,
            other => return Err(err(line, format!("unknown policy '{other}'"))),
        },
    };

    if !flows.is_empty() {
        cfg.flows.clear();
    }
    for (index, fields) in &flows {
        let mut f = template;
        for (&field, &(line, v)) in fields {
            let key = format!("flow.{index}.{field}");
            match field {
                "protocol" => {
                    f.protocol =
                        Traffic::parse(v).ok_or_else(|| err(line, format!("{key}: unknown protocol '{v}'")))?;
                }
                "access_mbps" => f.access_rate = number(line, &key, v)? * 1e6,
                "rtt_ms" => f.rtt_propagation = number(line, &key, v)? / 1e3,
                "start_s" => f.start_time = number(line, &key, v)?,
                "bytes" => f.bytes_to_send = Some(integer(line, &key, v)?),
                _ => unreachable!("flow keys are checked while reading"),
            }
        }
        if f.protocol == Traffic::Http && f.bytes_to_send.is_none() {
            f.bytes_to_send = Some(crate::config::http_transfer_bytes());
        }
        cfg.flows.push(f);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every key of `cfg`; [`parse_scenario`] reads it back unchanged.
/// Tuning constants outside the scenario keys are not written.
pub fn format_scenario(cfg: &SimConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("topology", cfg.topology.name().into());
    put("capacity_mbps", (cfg.bottleneck_capacity / 1e6).to_string());
    put("buffer_pkts", cfg.buffer.to_string());
    put("packet_bytes", cfg.packet_size.to_string());
    put("duration_s", cfg.duration.to_string());
    put("sample_interval_s", cfg.sample_interval.to_string());
    put("seed", cfg.seed.to_string());
    put("policy", cfg.queue_policy.name().into());
    match cfg.queue_policy {
        QueuePolicy::Red { params, w_q } => {
            put("red.bmin", params.b_min.to_string());
            put("red.bmax", params.b_max.to_string());
            put("red.pmax", params.p_max.to_string());
            put("red.wq", w_q.to_string());
        }
        QueuePolicy::Threshold { q_th } => put("threshold.qth", q_th.to_string()),
        QueuePolicy::DropTail => {}
    }
    for (i, f) in cfg.flows.iter().enumerate() {
        put(&format!("flow.{i}.protocol"), f.protocol.name().into());
        put(&format!("flow.{i}.access_mbps"), (f.access_rate / 1e6).to_string());
        put(&format!("flow.{i}.rtt_ms"), (f.rtt_propagation * 1e3).to_string());
        put(&format!("flow.{i}.start_s"), f.start_time.to_string());
        if let Some(b) = f.bytes_to_send {
            put(&format!("flow.{i}.bytes"), b.to_string());
        }
    }
    out
}
