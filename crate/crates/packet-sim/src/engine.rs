//! Event loop of the simulator.
//!
//! Packets pass a per-source access link, travel half the propagation round
//! trip to the FIFO router queue(s), and the acknowledgement returns the other
//! half after the last link finishes transmitting. Acks are never queued. Paths are FIFO, so the
//! first ack for a later transmission proves every earlier outstanding one
//! lost; the sender reacts to it at once. A retransmission timeout covers
//! the case where nothing later arrives.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::config::{SimConfig, Traffic, HTTP_ARRIVAL_RATE};
use crate::error::{Result, SimError};
use crate::metrics::{FlowOutcome, IntervalStats, LinkInterval, LinkMetrics, Metrics, QueueSample, WindowSample};
use crate::queue::{Decision, QueueState};
use crate::tcp::Window;

/// Upper bound on pending events.
pub const EVENT_LIMIT: usize = 1 << 25;
const INITIAL_RTO: f64 = 1.0;
const MAX_RTO: f64 = 60.0;

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: usize,
    tx: u64,
    sent: f64,
    hop: usize,
    arrived: f64,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    FlowStart(usize),
    LinkArrival { link: usize, pkt: Packet },
    ServiceDone { link: usize },
    Ack { flow: usize, tx: u64, sent: f64 },
    Timeout(usize),
    UdpSend(usize),
    HttpArrival(usize),
    Sample,
}

struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: the heap pops the earliest time, then the earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Sender {
    spec: usize,
    traffic: Traffic,
    generated: bool,
    window: Window,
    /// Transmission ids and send times, oldest first.
    outstanding: VecDeque<(u64, f64)>,
    next_tx: u64,
    acked: u64,
    total: Option<u64>,
    recovery_until: Option<u64>,
    srtt: Option<f64>,
    rttvar: f64,
    rto: f64,
    deadline: Option<f64>,
    timer_pending: bool,
    nic_free: f64,
    start: f64,
    completion: Option<f64>,
    active: bool,
    loss_events: u64,
    timeouts: u64,
}

struct Link {
    queue: QueueState,
    waiting: VecDeque<Packet>,
    in_service: Option<Packet>,
    busy_since: Option<f64>,
    arrivals: u64,
    departures: u64,
    max_queue: u32,
    trace: Vec<QueueSample>,
    /// Integral of the occupancy since the interval began, up to `touched`.
    area: f64,
    touched: f64,
}

impl Link {
    fn occupancy(&self) -> u32 {
        (self.waiting.len() + usize::from(self.in_service.is_some())) as u32
    }

    /// Accumulates the occupancy up to `now`; call before it changes.
    fn touch(&mut self, now: f64) {
        self.area += self.occupancy() as f64 * (now - self.touched);
        self.touched = now;
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    now: f64,
    seq: u64,
    heap: BinaryHeap<Scheduled>,
    rng: ChaCha8Rng,
    senders: Vec<Sender>,
    links: Vec<Link>,
    /// Counters of the open sampling interval, which began at `interval_start`.
    interval: IntervalStats,
    interval_start: f64,
    intervals: Vec<IntervalStats>,
    windows: Vec<WindowSample>,
    short_flow_times: Vec<f64>,
    packet_bits: f64,
    service_time: f64,
    http_gap: Exp<f64>,
}

/// Runs one scenario to its duration, or until every configured flow is
/// sized and finished.
pub fn run_simulation(cfg: &SimConfig) -> Result<Metrics> {
    cfg.validate()?;
    let links = (0..cfg.topology.links())
        .map(|_| Link {
            queue: QueueState::new(cfg.queue_policy, cfg.buffer),
            waiting: VecDeque::new(),
            in_service: None,
            busy_since: None,
            arrivals: 0,
            departures: 0,
            max_queue: 0,
            trace: Vec::new(),
            area: 0.0,
            touched: 0.0,
        })
        .collect();
    let mut sim = Sim {
        cfg,
        now: 0.0,
        seq: 0,
        heap: BinaryHeap::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        senders: Vec::new(),
        links,
        interval: IntervalStats {
            t_end: 0.0,
            duration: 0.0,
            injected: 0,
            drops: 0,
            delivered_bits: 0.0,
            links: vec![LinkInterval::default(); cfg.topology.links()],
        },
        interval_start: 0.0,
        intervals: Vec::new(),
        windows: Vec::new(),
        short_flow_times: Vec::new(),
        packet_bits: 8.0 * cfg.packet_size as f64,
        service_time: cfg.service_time(),
        http_gap: Exp::new(HTTP_ARRIVAL_RATE).expect("positive rate"),
    };
    for (i, f) in cfg.flows.iter().enumerate() {
        let total = match f.protocol {
            Traffic::Http => None,
            _ => f.bytes_to_send.map(|b| sim.packets_for(b)),
        };
        sim.senders
            .push(sim.new_sender(i, f.protocol, false, total, f.start_time));
        sim.schedule(f.start_time, Event::FlowStart(i))?;
    }
    sim.schedule(cfg.sample_interval, Event::Sample)?;
    let all_sized = cfg
        .flows
        .iter()
        .all(|f| f.protocol.is_tcp() && f.bytes_to_send.is_some());

    let mut end = cfg.duration;
    while let Some(next) = sim.heap.pop() {
        if next.time > cfg.duration {
            break;
        }
        sim.now = next.time;
        sim.handle(next.event)?;
        if all_sized && sim.senders[..cfg.flows.len()].iter().all(|s| s.completion.is_some()) {
            end = sim.now;
            break;
        }
    }
    if end - sim.interval_start > 1e-9 {
        sim.now = end;
        sim.close_interval();
    }
    Ok(sim.finish(end))
}

impl Sim<'_> {
    fn schedule(&mut self, time: f64, event: Event) -> Result<()> {
        if self.heap.len() >= EVENT_LIMIT {
            return Err(SimError::EventOverflow { limit: EVENT_LIMIT });
        }
        self.seq += 1;
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
        Ok(())
    }

    fn packets_for(&self, bytes: u64) -> u64 {
        bytes.div_ceil(self.cfg.packet_size as u64)
    }

    fn new_sender(&self, spec: usize, traffic: Traffic, generated: bool, total: Option<u64>, start: f64) -> Sender {
        // Long-lived flows may skip slow start; transfers always use it.
        let slow_start = self.cfg.tcp.slow_start || total.is_some();
        Sender {
            spec,
            traffic,
            generated,
            window: Window::new(traffic, &self.cfg.tcp, slow_start),
            outstanding: VecDeque::new(),
            next_tx: 0,
            acked: 0,
            total,
            recovery_until: None,
            srtt: None,
            rttvar: 0.0,
            rto: INITIAL_RTO,
            deadline: None,
            timer_pending: false,
            nic_free: 0.0,
            start,
            completion: None,
            active: false,
            loss_events: 0,
            timeouts: 0,
        }
    }

    fn handle(&mut self, event: Event) -> Result<()> {
        match event {
            Event::FlowStart(i) => self.start_flow(i),
            Event::LinkArrival { link, pkt } => self.arrive(link, pkt),
            Event::ServiceDone { link } => self.service_done(link),
            Event::Ack { flow, tx, sent } => self.ack(flow, tx, sent),
            Event::Timeout(i) => self.timeout(i),
            Event::UdpSend(i) => self.udp_send(i),
            Event::HttpArrival(spec) => self.http_arrival(spec),
            Event::Sample => self.sample(),
        }
    }

    fn start_flow(&mut self, i: usize) -> Result<()> {
        let now = self.now;
        match self.senders[i].traffic {
            Traffic::Udp => {
                self.senders[i].active = true;
                self.udp_send(i)
            }
            Traffic::Http => {
                let gap = self.http_gap.sample(&mut self.rng);
                self.schedule(now + gap, Event::HttpArrival(i))
            }
            _ => {
                self.senders[i].active = true;
                self.try_send(i)
            }
        }
    }

    fn http_arrival(&mut self, spec: usize) -> Result<()> {
        let now = self.now;
        let f = self.cfg.flows[spec];
        let total = self.packets_for(f.bytes_to_send.unwrap_or_else(crate::config::http_transfer_bytes));
        let mut s = self.new_sender(spec, Traffic::Reno, true, Some(total), now);
        s.active = true;
        self.senders.push(s);
        let id = self.senders.len() - 1;
        self.try_send(id)?;
        let gap = self.http_gap.sample(&mut self.rng);
        self.schedule(now + gap, Event::HttpArrival(spec))
    }

    /// Hands one packet to the flow's access link.
    fn transmit(&mut self, i: usize) -> Result<()> {
        let now = self.now;
        let spec = self.cfg.flows[self.senders[i].spec];
        let s = &mut self.senders[i];
        let tx = s.next_tx;
        s.next_tx += 1;
        let departs = s.nic_free.max(now) + self.packet_bits / spec.access_rate;
        s.nic_free = departs;
        if s.traffic != Traffic::Udp {
            s.outstanding.push_back((tx, now));
        }
        let path = self.cfg.path(s.spec);
        let pkt = Packet {
            flow: i,
            tx,
            sent: now,
            hop: 0,
            arrived: 0.0,
        };
        let reaches = departs + 0.5 * spec.rtt_propagation;
        self.schedule(reaches, Event::LinkArrival { link: path[0], pkt })
    }

    fn try_send(&mut self, i: usize) -> Result<()> {
        loop {
            let s = &self.senders[i];
            if !s.active {
                break;
            }
            let in_flight = s.outstanding.len() as u64;
            let allowed = s.window.win().floor().max(1.0) as u64;
            let has_data = s.total.is_none_or(|t| s.acked + in_flight < t);
            if in_flight >= allowed || !has_data {
                break;
            }
            self.transmit(i)?;
        }
        self.arm_timer(i)
    }

    fn arm_timer(&mut self, i: usize) -> Result<()> {
        let now = self.now;
        let s = &mut self.senders[i];
        if s.outstanding.is_empty() || !s.active {
            s.deadline = None;
            return Ok(());
        }
        let deadline = *s.deadline.get_or_insert(now + s.rto);
        if !s.timer_pending {
            s.timer_pending = true;
            self.schedule(deadline, Event::Timeout(i))?;
        }
        Ok(())
    }

    fn udp_send(&mut self, i: usize) -> Result<()> {
        let spec = self.cfg.flows[self.senders[i].spec];
        if let Some(bytes) = spec.bytes_to_send {
            if self.senders[i].next_tx >= self.packets_for(bytes) {
                return Ok(());
            }
        }
        self.transmit(i)?;
        let next = self.now + self.packet_bits / spec.access_rate;
        self.schedule(next, Event::UdpSend(i))
    }

    fn arrive(&mut self, l: usize, mut pkt: Packet) -> Result<()> {
        let now = self.now;
        if pkt.hop == 0 {
            self.interval.injected += 1;
        }
        let link = &mut self.links[l];
        link.arrivals += 1;
        let q = link.occupancy();
        if link.queue.decide(q, now, self.service_time, &mut self.rng) == Decision::Drop {
            self.interval.drops += 1;
            return Ok(());
        }
        pkt.arrived = now;
        link.touch(now);
        if link.in_service.is_none() {
            link.in_service = Some(pkt);
            link.busy_since = Some(now);
            self.interval.links[l].served += 1;
            self.schedule(now + self.service_time, Event::ServiceDone { link: l })?;
        } else {
            link.waiting.push_back(pkt);
        }
        let link = &mut self.links[l];
        link.max_queue = link.max_queue.max(link.occupancy());
        Ok(())
    }

    fn service_done(&mut self, l: usize) -> Result<()> {
        let now = self.now;
        let link = &mut self.links[l];
        link.touch(now);
        let pkt = link.in_service.take().expect("service completion without a packet");
        link.departures += 1;
        if let Some(next) = link.waiting.pop_front() {
            link.in_service = Some(next);
            self.interval.links[l].queueing_delay_sum += now - next.arrived;
            self.interval.links[l].served += 1;
            self.schedule(now + self.service_time, Event::ServiceDone { link: l })?;
        } else {
            let since = link.busy_since.take().expect("busy link has a start time");
            self.interval.links[l].busy += now - since.max(self.interval_start);
            link.queue.mark_idle(now);
        }

        let sender = &self.senders[pkt.flow];
        let path = self.cfg.path(sender.spec);
        if pkt.hop + 1 < path.len() {
            let pkt = Packet {
                hop: pkt.hop + 1,
                ..pkt
            };
            return self.schedule(
                now,
                Event::LinkArrival {
                    link: path[pkt.hop],
                    pkt,
                },
            );
        }
        self.interval.delivered_bits += self.packet_bits;
        if sender.traffic != Traffic::Udp {
            let rtt = self.cfg.flows[sender.spec].rtt_propagation;
            self.schedule(
                now + 0.5 * rtt,
                Event::Ack {
                    flow: pkt.flow,
                    tx: pkt.tx,
                    sent: pkt.sent,
                },
            )?;
        }
        Ok(())
    }

    fn ack(&mut self, i: usize, tx: u64, sent: f64) -> Result<()> {
        let now = self.now;
        let tuning = self.cfg.tcp;
        let s = &mut self.senders[i];
        // Acks of transmissions already written off by a timeout are ignored.
        if !s.active || s.outstanding.front().is_none_or(|f| f.0 > tx) {
            return Ok(());
        }
        let mut first_lost = None;
        while let Some(&(id, _)) = s.outstanding.front() {
            if id >= tx {
                break;
            }
            s.outstanding.pop_front();
            first_lost.get_or_insert(id);
        }
        s.outstanding.pop_front();
        s.acked += 1;

        let rtt = now - sent;
        match s.srtt {
            None => {
                s.srtt = Some(rtt);
                s.rttvar = rtt / 2.0;
            }
            Some(srtt) => {
                s.rttvar = 0.75 * s.rttvar + 0.25 * (srtt - rtt).abs();
                s.srtt = Some(0.875 * srtt + 0.125 * rtt);
            }
        }
        s.rto = (s.srtt.unwrap() + 4.0 * s.rttvar).clamp(tuning.min_rto, MAX_RTO);

        if let Some(lost) = first_lost {
            if s.recovery_until.is_none_or(|r| lost > r) {
                s.window.on_loss(&tuning);
                s.loss_events += 1;
                s.recovery_until = Some(s.next_tx - 1);
            }
        }
        match s.recovery_until {
            Some(r) if tx <= r => {
                if tx == r {
                    s.recovery_until = None;
                }
            }
            _ => s.window.on_ack(now, rtt, &tuning),
        }

        if s.total.is_some_and(|t| s.acked >= t) {
            s.completion = Some(now);
            s.active = false;
            s.deadline = None;
            if s.generated {
                self.short_flow_times.push(now - s.start);
            }
            return Ok(());
        }
        s.deadline = None;
        self.try_send(i)
    }

    fn timeout(&mut self, i: usize) -> Result<()> {
        let now = self.now;
        let s = &mut self.senders[i];
        s.timer_pending = false;
        let Some(deadline) = s.deadline else {
            return Ok(());
        };
        if !s.active {
            return Ok(());
        }
        if now < deadline {
            s.timer_pending = true;
            return self.schedule(deadline, Event::Timeout(i));
        }
        s.deadline = None;
        if s.outstanding.is_empty() {
            return Ok(());
        }
        s.outstanding.clear();
        s.window.on_timeout();
        s.timeouts += 1;
        s.recovery_until = Some(s.next_tx - 1);
        s.rto = (s.rto * 2.0).min(MAX_RTO);
        self.try_send(i)
    }

    fn sample(&mut self) -> Result<()> {
        self.close_interval();
        let next = self.now + self.cfg.sample_interval;
        if next <= self.cfg.duration + 1e-9 {
            self.schedule(next, Event::Sample)?;
        }
        Ok(())
    }

    /// Records the open interval and the queue and window samples at `now`.
    fn close_interval(&mut self) {
        let now = self.now;
        for (l, link) in self.links.iter_mut().enumerate() {
            if let Some(since) = link.busy_since {
                self.interval.links[l].busy += now - since.max(self.interval_start);
            }
            link.touch(now);
            let span = now - self.interval_start;
            link.trace.push(QueueSample {
                t: now,
                q: link.occupancy(),
                avg_q: link.queue.avg,
                mean_q: if span > 0.0 {
                    link.area / span
                } else {
                    link.occupancy() as f64
                },
            });
            link.area = 0.0;
        }
        let from = std::mem::replace(&mut self.interval_start, now);
        let closed = std::mem::replace(
            &mut self.interval,
            IntervalStats {
                t_end: 0.0,
                duration: 0.0,
                injected: 0,
                drops: 0,
                delivered_bits: 0.0,
                links: vec![LinkInterval::default(); self.links.len()],
            },
        );
        self.intervals.push(IntervalStats {
            t_end: now,
            duration: now - from,
            ..closed
        });
        for (i, s) in self.senders[..self.cfg.flows.len()].iter().enumerate() {
            if s.active && s.traffic.is_tcp() {
                self.windows.push(WindowSample {
                    t: now,
                    flow: i,
                    window: s.window.win(),
                });
            }
        }
    }

    fn finish(self, end: f64) -> Metrics {
        let links = self
            .links
            .into_iter()
            .map(|l| LinkMetrics {
                final_occupancy: l.occupancy() as u64,
                drops: l.queue.dropped,
                arrivals: l.arrivals,
                departures: l.departures,
                max_queue: l.max_queue,
                trace: l.trace,
            })
            .collect();
        let flows = self.senders[..self.cfg.flows.len()]
            .iter()
            .map(|s| FlowOutcome {
                traffic: s.traffic,
                start: s.start,
                sized: s.traffic.is_tcp() && s.total.is_some(),
                completion: s.completion,
                delivered_packets: s.acked,
                loss_events: s.loss_events,
                timeouts: s.timeouts,
            })
            .collect();
        Metrics {
            links,
            windows: self.windows,
            intervals: self.intervals,
            flows,
            short_flow_times: self.short_flow_times,
            capacity: self.cfg.bottleneck_capacity,
            end_time: end,
            measure_from: self.cfg.measure_from,
        }
    }
}
