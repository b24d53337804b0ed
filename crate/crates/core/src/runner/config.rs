//! Run configuration: TOML sections, named presets and layered overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::algorithms::{Algorithm, Schedules};
use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::runner::presets;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "VRA_OUT_DIR";

/// `$VRA_OUT_DIR`, or `vra-out` when unset or empty.
pub fn default_out_root() -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("vra-out"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    /// A ring plus independent random chords.
    RingRandom,
    /// Read from an edge-list file.
    EdgeList,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsKind {
    Metropolis,
    EqualNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub n: usize,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub weights: WeightsKind,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { kind: GraphKind::RingRandom, n: 10, p: 0.3, path: None, weights: WeightsKind::Metropolis }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Exact,
    Gaussian,
    Quantizer,
}

/// Flat channel section; only the parameter of the selected kind is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub sigma2: f64,
    pub delta: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { kind: ChannelKind::Gaussian, sigma2: 1.0, delta: 10.0 }
    }
}

impl ChannelConfig {
    pub fn spec(&self) -> Result<ChannelSpec> {
        match self.kind {
            ChannelKind::Exact => Ok(ChannelSpec::Exact),
            ChannelKind::Gaussian => ChannelSpec::gaussian(self.sigma2),
            ChannelKind::Quantizer => ChannelSpec::quantizer(self.delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Logistic,
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    /// LIBSVM file (logistic).
    pub data: PathBuf,
    /// Regularization; defaults to `1/N` for the samples in use.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub bias: bool,
    /// Use a uniform random subset of this many samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<usize>,
    /// Mini-batch size of the stochastic oracle (logistic).
    pub batch: usize,
    /// Quadratic dimension, spectrum bounds and center spread.
    pub dim: usize,
    pub mu: f64,
    pub l: f64,
    pub center_scale: f64,
    /// Total variance of the additive gradient noise (quadratic).
    pub sigma2_xi: f64,
    /// Gradient-norm tolerance for the reference solution.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            kind: ObjectiveKind::Quadratic,
            data: PathBuf::from("data/mushrooms"),
            delta: None,
            bias: false,
            subset: None,
            batch: 1,
            dim: 5,
            mu: 1.0,
            l: 10.0,
            center_scale: 1.0,
            sigma2_xi: 1.0,
            tol: 1e-10,
            max_iter: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub concentration: f64,
    /// Defaults to the instance seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// A saved `agent,sample_index` CSV to use instead of sampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { concentration: 0.5, seed: None, file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub horizon: u64,
    pub stride: u64,
    /// Root of the noise and sampling streams; replication `r` uses `seed + r`.
    pub seed: u64,
    /// Seed for the graph, data subset, partition and synthetic objectives.
    /// Defaults to `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_seed: Option<u64>,
    pub reps: usize,
    /// Worker threads for replications; 0 uses all cores.
    pub workers: usize,
    pub out: PathBuf,
    /// Directory for cached reference solutions; defaults to `<out>/cache`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub payload_guard: f64,
    pub graph: GraphConfig,
    pub channel: ChannelConfig,
    pub objective: ObjectiveConfig,
    pub partition: PartitionConfig,
    pub schedules: Schedules,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::VraDgt,
            horizon: 1000,
            stride: 10,
            seed: 1,
            instance_seed: None,
            reps: 1,
            workers: 0,
            out: default_out_root(),
            cache_dir: None,
            payload_guard: crate::vra::DEFAULT_PAYLOAD_GUARD,
            graph: GraphConfig::default(),
            channel: ChannelConfig::default(),
            objective: ObjectiveConfig::default(),
            partition: PartitionConfig::default(),
            schedules: Schedules::synthetic(),
        }
    }
}

impl RunConfig {
    pub fn instance_seed(&self) -> u64 {
        self.instance_seed.unwrap_or(self.seed)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }

    /// Checks everything that can be checked without touching files.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if !(self.payload_guard > 0.0) {
            return bad(format!("payload_guard must be > 0, got {}", self.payload_guard));
        }
        match self.graph.kind {
            GraphKind::RingRandom => {
                if self.graph.n < 3 {
                    return bad(format!("a ring needs n >= 3, got {}", self.graph.n));
                }
                if !(0.0..=1.0).contains(&self.graph.p) {
                    return bad(format!("link probability must lie in [0, 1], got {}", self.graph.p));
                }
            }
            GraphKind::EdgeList => {
                if self.graph.path.is_none() {
                    return bad("graph.kind = \"edge-list\" needs graph.path".into());
                }
            }
        }
        self.channel.spec()?;
        self.schedules.validate()?;
        let o = &self.objective;
        if o.batch == 0 {
            return bad("objective.batch must be >= 1".into());
        }
        if let Some(delta) = o.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                return bad(format!("objective.delta must be > 0, got {delta}"));
            }
        }
        if o.kind == ObjectiveKind::Quadratic {
            if o.dim == 0 {
                return bad("objective.dim must be >= 1".into());
            }
            if !(o.mu > 0.0 && o.l >= o.mu) {
                return bad(format!("need 0 < mu <= L, got mu = {}, L = {}", o.mu, o.l));
            }
            if !(o.sigma2_xi >= 0.0 && o.sigma2_xi.is_finite()) {
                return bad(format!("objective.sigma2_xi must be >= 0, got {}", o.sigma2_xi));
            }
        }
        if !(o.tol > 0.0) || o.max_iter == 0 {
            return bad("objective.tol must be > 0 and objective.max_iter >= 1".into());
        }
        if !(self.partition.concentration > 0.0 && self.partition.concentration.is_finite()) {
            return bad(format!("partition.concentration must be > 0, got {}", self.partition.concentration));
        }
        if self.algorithm.is_baseline() && self.channel.kind != ChannelKind::Exact {
            return bad(format!("{} assumes exact communication; set channel.kind = \"exact\"", self.algorithm));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidState(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {}", e.message())))
    }
}

/// Where a run's settings come from. Later layers win:
/// defaults < preset < file < overrides.
#[derive(Clone, Debug, Default)]
pub struct ConfigSources {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
    /// `(dotted.key, value)` pairs; values are TOML literals, bare strings
    /// allowed.
    pub overrides: Vec<(String, String)>,
}

fn to_value(cfg: &RunConfig) -> Result<Table> {
    Table::try_from(cfg).map_err(|e| Error::InvalidState(format!("cannot serialize config: {e}")))
}

fn merge(base: &mut Table, layer: Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(l)) => merge(b, l),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `s` as a TOML string literal.
pub fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Parses a flag value as a TOML literal, falling back to a plain string.
pub fn parse_literal(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `dotted.key = value`, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidParameter(format!("bad config key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("config key `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(raw: &str) -> Result<(String, String)> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{raw}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn read_file_layer(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<Table>().map_err(|e| Error::InvalidParameter(format!("{}: {}", path.display(), e.message())))
}

/// Builds and validates the effective configuration.
pub fn resolve(src: &ConfigSources) -> Result<RunConfig> {
    let mut file_layer = src.file.as_deref().map(read_file_layer).transpose()?;
    let file_preset = match file_layer.as_mut().and_then(|t| t.remove("preset")) {
        Some(Value::String(s)) => Some(s),
        Some(v) => return Err(Error::InvalidParameter(format!("preset must be a string, got {v}"))),
        None => None,
    };
    let base_cfg = match src.preset.clone().or(file_preset) {
        Some(name) => presets::preset(&name)?,
        None => RunConfig::default(),
    };
    let mut table = to_value(&base_cfg)?;
    if let Some(layer) = file_layer {
        merge(&mut table, layer);
    }
    for (k, v) in &src.overrides {
        set_path(&mut table, k, parse_literal(v))?;
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidParameter(format!("config: {}", e.message())))?;
    cfg.validate()?;
    Ok(cfg)
}
