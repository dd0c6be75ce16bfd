//! Discrete-event packet simulator for long-lived and short TCP flows over a
//! RED, threshold or drop-tail router queue.
//!
//! One run is single-threaded and fully determined by its configuration and
//! seed. [`run_seeds`] runs independent seeds in parallel.

pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod queue;
pub mod scenario;
pub mod tcp;

use rayon::prelude::*;

pub use config::{FlowSpec, Profile, QueuePolicy, SimConfig, TcpTuning, Topology, Traffic};
pub use engine::run_simulation;
pub use error::{Result, SimError};
pub use metrics::{compute_afct, Metrics, Summary};
pub use queue::{red_enqueue_decision, threshold_enqueue_decision, Decision, QueueState};
pub use scenario::{format_scenario, parse_scenario};
pub use tcp::{compound_window_update, CompoundWindow, Phase, Window, WindowEvent};

/// Runs `cfg` once per seed, in parallel; results come back in seed order.
pub fn run_seeds(cfg: &SimConfig, seeds: &[u64]) -> Result<Vec<Metrics>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run_simulation(&c)
        })
        .collect()
}
