//! Admission decisions of the router queues.

use rand::Rng;
use redlab::protocol::red_drop_probability;
use redlab::RedParams;

use crate::config::QueuePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Admit,
    Drop,
}

/// Policy state of one queue plus its counters. `q` arguments are the number
/// of packets held, including the one in transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub policy: QueuePolicy,
    pub buffer: u32,
    /// EWMA of the queue length seen by arrivals.
    pub avg: f64,
    pub admitted: u64,
    pub dropped: u64,
    /// Time the queue last became empty, for decaying the average.
    idle_since: Option<f64>,
}

impl QueueState {
    pub fn new(policy: QueuePolicy, buffer: u32) -> Self {
        QueueState {
            policy,
            buffer,
            avg: 0.0,
            admitted: 0,
            dropped: 0,
            idle_since: Some(0.0),
        }
    }

    pub fn mark_idle(&mut self, now: f64) {
        self.idle_since = Some(now);
    }

    /// Decision for a packet arriving at `now` to a queue holding `q`.
    /// `service_time` converts idle time into missed averaging updates.
    pub fn decide<R: Rng + ?Sized>(&mut self, q: u32, now: f64, service_time: f64, rng: &mut R) -> Decision {
        let decision = match self.policy {
            QueuePolicy::Red { params, w_q } => {
                if let Some(since) = self.idle_since.take() {
                    // An idle queue would have fed zeros to the average.
                    let missed = ((now - since) / service_time).max(0.0);
                    self.avg *= (1.0 - w_q).powf(missed);
                }
                red_enqueue_decision(&mut self.avg, q, self.buffer, &params, w_q, rng)
            }
            QueuePolicy::Threshold { q_th } => {
                if q >= self.buffer {
                    Decision::Drop
                } else {
                    threshold_enqueue_decision(q, q_th)
                }
            }
            QueuePolicy::DropTail => {
                if q >= self.buffer {
                    Decision::Drop
                } else {
                    Decision::Admit
                }
            }
        };
        match decision {
            Decision::Admit => self.admitted += 1,
            Decision::Drop => self.dropped += 1,
        }
        decision
    }
}

/// Updates `avg ← (1−w_q) avg + w_q q` and draws a Bernoulli drop with the
/// RED probability of the new average. A full buffer always drops.
pub fn red_enqueue_decision<R: Rng + ?Sized>(
    avg: &mut f64,
    q: u32,
    buffer: u32,
    red: &RedParams,
    w_q: f64,
    rng: &mut R,
) -> Decision {
    *avg = (1.0 - w_q) * *avg + w_q * q as f64;
    if q >= buffer {
        return Decision::Drop;
    }
    let p = red_drop_probability(*avg, red);
    if p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p) {
        Decision::Drop
    } else {
        Decision::Admit
    }
}

/// Drops exactly when the queue already holds `q_th` packets or more.
pub fn threshold_enqueue_decision(q: u32, q_th: u32) -> Decision {
    if q >= q_th {
        Decision::Drop
    } else {
        Decision::Admit
    }
}
