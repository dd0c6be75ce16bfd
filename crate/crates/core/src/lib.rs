//! Fluid models of Compound TCP (and related loss-based variants) over RED
//! and threshold queues: equilibria, delay-differential integration, local
//! stability analysis and Hopf normal form.

pub mod equilibrium;
pub mod error;
pub mod fluid;
pub mod hopf;
pub mod protocol;
pub mod stability;

pub use equilibrium::Equilibrium;
pub use error::{Error, Result};
pub use fluid::{FluidModel, FluidSystemKind};
pub use protocol::{CompoundParams, IllinoisParams, NetworkParams, ProtocolSpec, RedParams, ThresholdParams};
