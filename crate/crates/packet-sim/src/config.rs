//! Scenario description: topology, queue policy, traffic and run control.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redlab::{CompoundParams, RedParams};

use crate::error::{Result, SimError};

/// Buffer sizing rule: capacity times this reference round-trip time.
pub const BUFFER_REFERENCE_RTT: f64 = 0.25;
/// Arrival rate of the short-flow generator, transfers per second.
pub const HTTP_ARRIVAL_RATE: f64 = 50.0;
/// Aggregate rate the short-flow generator is calibrated to, bits per second.
pub const HTTP_AGGREGATE_RATE: f64 = 2e6;
/// Post-transient measurement window when none is configured, seconds.
pub const DEFAULT_MEASUREMENT_WINDOW: f64 = 25.0;
/// Profile flows start uniformly at random within this many seconds.
pub const START_SPREAD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Dumbbell,
    /// Two equal links in series. Flows are split by position into thirds:
    /// the first third crosses both links, the second only the first link,
    /// the last only the second link.
    ParkingLot,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Dumbbell => "dumbbell",
            Topology::ParkingLot => "parking-lot",
        }
    }

    pub fn links(self) -> usize {
        match self {
            Topology::Dumbbell => 1,
            Topology::ParkingLot => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traffic {
    Compound,
    Reno,
    Cubic,
    /// Constant bit rate at the access rate, no feedback.
    Udp,
    /// Generator of short Reno transfers with exponential inter-arrivals.
    Http,
}

impl Traffic {
    pub fn name(self) -> &'static str {
        match self {
            Traffic::Compound => "compound",
            Traffic::Reno => "reno",
            Traffic::Cubic => "cubic",
            Traffic::Udp => "udp",
            Traffic::Http => "http",
        }
    }

    pub fn parse(s: &str) -> Option<Traffic> {
        Some(match s {
            "compound" => Traffic::Compound,
            "reno" => Traffic::Reno,
            "cubic" => Traffic::Cubic,
            "udp" => Traffic::Udp,
            "http" => Traffic::Http,
            _ => return None,
        })
    }

    pub fn is_tcp(self) -> bool {
        matches!(self, Traffic::Compound | Traffic::Reno | Traffic::Cubic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec {
    pub protocol: Traffic,
    /// Bits per second.
    pub access_rate: f64,
    /// Two-way propagation delay, seconds.
    pub rtt_propagation: f64,
    pub start_time: f64,
    /// Transfer size; `None` is a long-lived flow. For the short-flow
    /// generator this is the size of each transfer.
    pub bytes_to_send: Option<u64>,
}

impl FlowSpec {
    pub fn long_lived(protocol: Traffic, access_rate: f64, rtt: f64) -> Self {
        FlowSpec {
            protocol,
            access_rate,
            rtt_propagation: rtt,
            start_time: 0.0,
            bytes_to_send: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueuePolicy {
    /// Per-arrival Bernoulli drop on the EWMA of the queue; `w_q = 1` drops on
    /// the instantaneous queue.
    Red {
        params: RedParams,
        w_q: f64,
    },
    /// Deterministic drop once the queue holds `q_th` packets.
    Threshold {
        q_th: u32,
    },
    DropTail,
}

impl QueuePolicy {
    pub const DEFAULT_W_Q: f64 = 0.002;

    pub fn red(b_min: f64, b_max: f64) -> Self {
        QueuePolicy::Red {
            params: RedParams {
                b_min,
                b_max,
                ..RedParams::default()
            },
            w_q: Self::DEFAULT_W_Q,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QueuePolicy::Red { .. } => "red",
            QueuePolicy::Threshold { .. } => "threshold",
            QueuePolicy::DropTail => "droptail",
        }
    }
}

/// Sender-side constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpTuning {
    pub compound: CompoundParams,
    /// Backlog threshold for early congestion detection, packets.
    pub gamma_tilde: f64,
    /// Rate at which the delay window shrinks once congestion is detected.
    pub zeta: f64,
    pub cubic_c: f64,
    pub cubic_beta: f64,
    /// When false, long-lived flows start in congestion avoidance.
    pub slow_start: bool,
    pub initial_window: f64,
    pub min_rto: f64,
}

impl Default for TcpTuning {
    fn default() -> Self {
        TcpTuning {
            compound: CompoundParams::default(),
            gamma_tilde: 30.0,
            zeta: 0.5,
            cubic_c: 0.4,
            cubic_beta: 0.7,
            slow_start: true,
            initial_window: 2.0,
            min_rto: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    /// Bits per second, per link.
    pub bottleneck_capacity: f64,
    /// Packets, per link.
    pub buffer: u32,
    /// Bytes.
    pub packet_size: u32,
    pub flows: Vec<FlowSpec>,
    pub queue_policy: QueuePolicy,
    pub duration: f64,
    pub seed: u64,
    pub sample_interval: f64,
    pub tcp: TcpTuning,
    /// Start of the measurement window. `None` measures the last
    /// [`DEFAULT_MEASUREMENT_WINDOW`] seconds (at most half the run).
    pub measure_from: Option<f64>,
}

/// Named scenario sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 20 flows, 25 Mbps, 120 s.
    Desk,
    /// 60 flows, 100 Mbps, 500 s.
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Profile> {
        match s {
            "desk" => Some(Profile::Desk),
            "paper" => Some(Profile::Paper),
            _ => None,
        }
    }

    pub fn flows(self) -> usize {
        match self {
            Profile::Desk => 20,
            Profile::Paper => 60,
        }
    }

    pub fn capacity(self) -> f64 {
        match self {
            Profile::Desk => 25e6,
            Profile::Paper => 100e6,
        }
    }

    pub fn duration(self) -> f64 {
        match self {
            Profile::Desk => 120.0,
            Profile::Paper => 500.0,
        }
    }

    /// Homogeneous Compound traffic offering 120% of capacity through the
    /// access links. Start times are drawn from `seed`.
    pub fn config(self, rtt: f64, policy: QueuePolicy, seed: u64) -> SimConfig {
        let n = self.flows();
        let capacity = self.capacity();
        let packet_size = 1500;
        let access = 1.2 * capacity / n as f64;
        let mut flows = vec![FlowSpec::long_lived(Traffic::Compound, access, rtt); n];
        stagger_starts(&mut flows, seed);
        SimConfig {
            topology: Topology::Dumbbell,
            bottleneck_capacity: capacity,
            buffer: bdp_buffer(capacity, packet_size),
            packet_size,
            flows,
            queue_policy: policy,
            duration: self.duration(),
            seed,
            sample_interval: 0.1,
            tcp: TcpTuning::default(),
            measure_from: None,
        }
    }

    /// Compound, CUBIC, UDP and short-flow traffic in the proportions
    /// 27 : 28 : 8 : 1 generator, scaled to the profile's flow count.
    pub fn mixed_config(self, rtt: f64, policy: QueuePolicy, seed: u64) -> SimConfig {
        let mut cfg = self.config(rtt, policy, seed);
        let capacity = cfg.bottleneck_capacity;
        let tcp = (self.flows() * 55).div_ceil(60);
        let udp = (self.flows() * 8).div_ceil(60);
        let access = cfg.flows[0].access_rate;
        let mut flows = Vec::new();
        for i in 0..tcp {
            let traffic = if i % 2 == 0 { Traffic::Compound } else { Traffic::Cubic };
            flows.push(FlowSpec::long_lived(traffic, access, rtt));
        }
        // UDP carries 8% of capacity in total, as 8 Mbps does on 100 Mbps.
        let udp_rate = 0.08 * capacity / udp as f64;
        for _ in 0..udp {
            flows.push(FlowSpec::long_lived(Traffic::Udp, udp_rate, rtt));
        }
        flows.push(FlowSpec {
            protocol: Traffic::Http,
            access_rate: access,
            rtt_propagation: rtt,
            start_time: 0.0,
            bytes_to_send: Some(http_transfer_bytes()),
        });
        stagger_starts(&mut flows, seed);
        cfg.flows = flows;
        cfg
    }
}

/// Start times uniform in `[0, START_SPREAD)`, rounded to the microsecond
/// so that scenario files reproduce them exactly.
fn stagger_starts(flows: &mut [FlowSpec], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f57_a27);
    for f in flows {
        f.start_time = (rng.gen_range(0.0..START_SPREAD) * 1e6).round() / 1e6;
    }
}

/// Transfer size that makes the short-flow generator average
/// [`HTTP_AGGREGATE_RATE`].
pub fn http_transfer_bytes() -> u64 {
    (HTTP_AGGREGATE_RATE / HTTP_ARRIVAL_RATE / 8.0).round() as u64
}

/// Buffer from the bandwidth-delay rule at [`BUFFER_REFERENCE_RTT`].
pub fn bdp_buffer(capacity: f64, packet_size: u32) -> u32 {
    (capacity * BUFFER_REFERENCE_RTT / (8.0 * packet_size as f64))
        .ceil()
        .max(1.0) as u32
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.bottleneck_capacity > 0.0 && self.bottleneck_capacity.is_finite()) {
            return bad(format!("capacity must be > 0, got {}", self.bottleneck_capacity));
        }
        if self.buffer < 1 {
            return bad("buffer must hold at least one packet".into());
        }
        if self.packet_size == 0 {
            return bad("packet size must be > 0".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.sample_interval > 0.0) {
            return bad(format!("sample interval must be > 0, got {}", self.sample_interval));
        }
        if self.flows.is_empty() {
            return bad("at least one flow is required".into());
        }
        for (i, f) in self.flows.iter().enumerate() {
            if !(f.access_rate > 0.0 && f.access_rate.is_finite()) {
                return bad(format!("flow {i}: access rate must be > 0"));
            }
            if !(f.rtt_propagation > 0.0 && f.rtt_propagation.is_finite()) {
                return bad(format!("flow {i}: rtt must be > 0"));
            }
            if !(f.start_time >= 0.0) {
                return bad(format!("flow {i}: start time must be >= 0"));
            }
            if f.bytes_to_send == Some(0) {
                return bad(format!("flow {i}: bytes must be > 0"));
            }
        }
        match self.queue_policy {
            QueuePolicy::Red { params, w_q } => {
                if !(params.b_min >= 0.0 && params.b_min < params.b_max) {
                    return bad(format!(
                        "RED thresholds must satisfy 0 <= b_min < b_max, got {} and {}",
                        params.b_min, params.b_max
                    ));
                }
                if !(params.p_max > 0.0 && params.p_max < 1.0) {
                    return bad(format!("RED p_max must lie in (0, 1), got {}", params.p_max));
                }
                if !(w_q > 0.0 && w_q <= 1.0) {
                    return bad(format!("RED w_q must lie in (0, 1], got {w_q}"));
                }
            }
            QueuePolicy::Threshold { q_th } => {
                if q_th < 1 {
                    return bad("q_th must be >= 1".into());
                }
            }
            QueuePolicy::DropTail => {}
        }
        Ok(())
    }

    /// Transmission time of one packet on the bottleneck.
    pub fn service_time(&self) -> f64 {
        8.0 * self.packet_size as f64 / self.bottleneck_capacity
    }

    /// Links crossed by flow `index`, in order.
    pub fn path(&self, index: usize) -> &'static [usize] {
        match self.topology {
            Topology::Dumbbell => &[0],
            Topology::ParkingLot => match index * 3 / self.flows.len() {
                0 => &[0, 1],
                1 => &[0],
                _ => &[1],
            },
        }
    }

    /// Sum over flows of the rate each can offer through its access link.
    pub fn offered_load(&self) -> f64 {
        self.flows.iter().map(|f| f.access_rate).sum()
    }
}
