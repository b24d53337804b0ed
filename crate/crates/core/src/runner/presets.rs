//! Named configurations for the logistic-regression experiments.

use std::path::PathBuf;

use crate::algorithms::{Algorithm, Schedules};
use crate::error::{Error, Result};
use crate::runner::config::{
    ChannelConfig, ChannelKind, GraphConfig, GraphKind, ObjectiveConfig, ObjectiveKind, PartitionConfig, RunConfig,
    WeightsKind, default_out_root,
};

pub const PRESETS: [&str; 4] = ["fig1-gaussian", "fig1-quantizer", "fig2-gaussian", "fig2-quantizer"];

/// 50 agents on a ring with chords of probability 0.3, mushrooms data split
/// by a Dirichlet(0.5) draw, the experimental schedules, 10^5 rounds.
fn experiment(algorithm: Algorithm, channel: ChannelKind, name: &str) -> RunConfig {
    RunConfig {
        algorithm,
        horizon: 100_000,
        stride: 100,
        seed: 1,
        instance_seed: None,
        reps: 1,
        workers: 0,
        out: default_out_root().join(name),
        cache_dir: None,
        payload_guard: crate::vra::DEFAULT_PAYLOAD_GUARD,
        graph: GraphConfig { kind: GraphKind::RingRandom, n: 50, p: 0.3, path: None, weights: WeightsKind::Metropolis },
        channel: ChannelConfig { kind: channel, sigma2: 1.0, delta: 10.0 },
        objective: ObjectiveConfig {
            kind: ObjectiveKind::Logistic,
            data: PathBuf::from("data/mushrooms"),
            delta: None,
            bias: false,
            subset: None,
            batch: 1,
            ..ObjectiveConfig::default()
        },
        partition: PartitionConfig { concentration: 0.5, seed: None, file: None },
        schedules: Schedules::table1(),
    }
}

pub fn preset(name: &str) -> Result<RunConfig> {
    Ok(match name {
        "fig1-gaussian" => experiment(Algorithm::VraDgt, ChannelKind::Gaussian, name),
        "fig1-quantizer" => experiment(Algorithm::VraDgt, ChannelKind::Quantizer, name),
        "fig2-gaussian" => experiment(Algorithm::VraDsgt, ChannelKind::Gaussian, name),
        "fig2-quantizer" => experiment(Algorithm::VraDsgt, ChannelKind::Quantizer, name),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset `{name}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    })
}
