//! Simulation engine for decentralized gradient tracking over noisy
//! communication channels.

#[cfg(test)]
#[macro_use]
mod test_macros;

pub mod algorithms;
pub mod channels;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod objectives;
pub mod rng;
pub mod runner;
pub mod stack;
pub mod vra;

pub use algorithms::{Algorithm, AlgState, Env, Schedules, StepRecord};
pub use channels::ChannelSpec;
pub use error::{Error, Result};
pub use graph::{Topology, WeightKind, WeightMatrix};
pub use metrics::{IterateSummary, RateFit};
pub use objectives::{Dataset, NoiseModel, Objective, Partition, Problem};
pub use rng::{Purpose, Streams};
pub use stack::Stack;
