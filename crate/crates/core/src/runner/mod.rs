//! Experiment orchestration: builds instances from a [`RunConfig`], runs
//! replications and writes traces.

pub mod cache;
pub mod config;
pub mod plot;
pub mod presets;
pub mod sweep;
pub mod trace;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::algorithms::{self, check_theorem_conditions, AlgState, Algorithm, Env, ProblemConstants, Theorem, TheoremReport};
use crate::error::{Error, Result};
use crate::graph::{compute_eta_w, SpectralInfo, Topology, WeightMatrix};
use crate::metrics::{field_series, fit_rate, IterateSummary, RateFit, Summarizer};
use crate::objectives::{
    dirichlet_partition, parse_libsvm, quadratic_optimum, LogisticObjective, NoiseModel, Objective, Partition, Problem,
    QuadraticObjective,
};
use crate::rng::{Purpose, Streams};

pub use config::{ConfigSources, RunConfig};

/// Everything fixed across the replications of one run.
#[derive(Clone, Debug)]
pub struct Instance {
    pub config: RunConfig,
    pub topology: Topology,
    pub weights: WeightMatrix,
    pub problem: Problem,
    /// Empty when built by [`prepare_report`].
    pub x_star: Vec<f64>,
    pub x_star_cached: bool,
    pub partition: Option<Partition>,
    pub spectral: Option<SpectralInfo>,
    pub report: Option<TheoremReport>,
    pub warnings: Vec<String>,
}

fn build_topology(cfg: &RunConfig) -> Result<Topology> {
    match cfg.graph.kind {
        config::GraphKind::RingRandom => {
            let mut rng = Streams::new(cfg.instance_seed()).stream(Purpose::Graph, 0, 0, 0);
            Topology::ring_plus_random(cfg.graph.n, cfg.graph.p, &mut rng)
        }
        config::GraphKind::EdgeList => {
            let path = cfg.graph.path.as_deref().ok_or_else(|| Error::InvalidParameter("graph.path is not set".into()))?;
            Topology::read_edge_list(path)
        }
    }
}

/// Splits `data` across `n` agents with the partition stream of `seed`.
pub fn partition_dataset(data: &Path, n: usize, concentration: f64, seed: u64) -> Result<Partition> {
    let ds = parse_libsvm(data)?;
    let mut rng = Streams::new(seed).stream(Purpose::Partition, 0, 0, 0);
    dirichlet_partition(&ds, n, concentration, &mut rng)
}

fn build_logistic(cfg: &RunConfig, n: usize, solve: bool) -> Result<(Problem, Partition, Vec<f64>, bool)> {
    let o = &cfg.objective;
    let mut ds = parse_libsvm(&o.data)?;
    if let Some(m) = o.subset {
        let mut rng = Streams::new(cfg.instance_seed()).stream(Purpose::Instance, 0, 1, 0);
        ds = ds.random_subset(m, &mut rng)?;
    }
    if o.bias {
        ds = ds.with_bias();
    }
    let delta = o.delta.unwrap_or(1.0 / ds.len() as f64);
    let partition = match &cfg.partition.file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Partition::parse_csv(&text, ds.len(), path)?
        }
        None => {
            let seed = cfg.partition.seed.unwrap_or(cfg.instance_seed());
            let mut rng = Streams::new(seed).stream(Purpose::Partition, 0, 0, 0);
            dirichlet_partition(&ds, n, cfg.partition.concentration, &mut rng)?
        }
    };
    if partition.agents() != n {
        return Err(Error::InvalidInput(format!(
            "partition has {} agents but the graph has {n}",
            partition.agents()
        )));
    }
    let ds = Arc::new(ds);
    let locals = partition
        .shards()
        .iter()
        .map(|shard| LogisticObjective::new(ds.clone(), shard.clone(), delta).map(Objective::Logistic))
        .collect::<Result<Vec<_>>>()?;
    let noise = if cfg.algorithm.is_stochastic() { NoiseModel::MiniBatch { batch: o.batch } } else { NoiseModel::None };
    let problem = Problem::new(locals, noise)?;
    let (x_star, cached) =
        if solve { cache::reference_solution(&problem, &cfg.cache_dir(), o.tol, o.max_iter)? } else { (Vec::new(), false) };
    Ok((problem, partition, x_star, cached))
}

fn build_quadratic(cfg: &RunConfig, n: usize) -> Result<(Problem, Vec<f64>)> {
    let o = &cfg.objective;
    let streams = Streams::new(cfg.instance_seed());
    let quads = (0..n)
        .map(|i| {
            let mut rng = streams.stream(Purpose::Instance, 0, 2, i as u64);
            QuadraticObjective::random(o.dim, o.mu, o.l, o.center_scale, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let x_star = quadratic_optimum(&quads)?;
    let noise = if cfg.algorithm.is_stochastic() { NoiseModel::Additive { sigma2: o.sigma2_xi } } else { NoiseModel::None };
    Ok((Problem::new(quads.into_iter().map(Objective::Quadratic).collect(), noise)?, x_star))
}

/// Builds the graph, weights, local objectives and reference solution.
pub fn prepare(cfg: RunConfig) -> Result<Instance> {
    build(cfg, true)
}

/// Like [`prepare`] but skips the reference solution, leaving `x_star`
/// empty. Enough for the condition report.
pub fn prepare_report(cfg: RunConfig) -> Result<Instance> {
    build(cfg, false)
}

fn build(cfg: RunConfig, solve: bool) -> Result<Instance> {
    cfg.validate()?;
    let topology = build_topology(&cfg)?;
    let n = topology.n();
    let mut warnings = Vec::new();
    if cfg.graph.kind == config::GraphKind::EdgeList && n != cfg.graph.n {
        warnings.push(format!("edge list defines {n} agents; graph.n = {} is ignored", cfg.graph.n));
    }
    let weights = match cfg.graph.weights {
        config::WeightsKind::Metropolis => WeightMatrix::metropolis(&topology),
        config::WeightsKind::EqualNeighbor => {
            let (w, report) = WeightMatrix::equal_neighbor(&topology);
            if !report.doubly_stochastic {
                warnings.push(
                    "equal-neighbor weights are only row-stochastic on this graph; tracking identities and rate guarantees do not apply".into(),
                );
            }
            w
        }
    };
    let (problem, partition, x_star, x_star_cached) = match cfg.objective.kind {
        config::ObjectiveKind::Logistic => {
            let (p, part, x, cached) = build_logistic(&cfg, n, solve)?;
            (p, Some(part), x, cached)
        }
        config::ObjectiveKind::Quadratic => {
            let (p, x) = build_quadratic(&cfg, n)?;
            (p, None, x, false)
        }
    };
    let spectral = match compute_eta_w(&weights) {
        Ok(s) => Some(s),
        Err(e) => {
            warnings.push(format!("spectral constant unavailable: {e}"));
            None
        }
    };
    let report = spectral.map(|s| {
        let which = if cfg.algorithm.is_stochastic() { Theorem::Two } else { Theorem::One };
        let l = if which == Theorem::Two { problem.stochastic_smoothness() } else { problem.smoothness() };
        let pc = ProblemConstants { mu: problem.strong_convexity(), l, n, eta_w: s.eta_w };
        check_theorem_conditions(&pc, &cfg.schedules, which)
    });
    Ok(Instance { config: cfg, topology, weights, problem, x_star, x_star_cached, partition, spectral, report, warnings })
}

/// Runs `horizon` rounds and collects summaries at `k = 1`, every multiple
/// of `stride`, and `k = horizon`. A zero horizon still evaluates round 1.
/// Rows are appended to `sink` as they are produced, so a failed run keeps
/// its prefix.
pub fn simulate(alg: Algorithm, env: &Env<'_>, x_star: &[f64], horizon: u64, stride: u64, sink: &mut Vec<IterateSummary>) -> Result<()> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let mut state = AlgState::initial(alg, env)?;
    let mut summ = Summarizer::new(x_star.to_vec());
    for k in 1..=horizon.max(1) {
        let rec = algorithms::step(alg, &mut state, env)?;
        if k == 1 || k % stride == 0 || k == horizon {
            sink.push(summ.summarize(&rec)?);
        }
    }
    Ok(())
}

impl Instance {
    pub fn env(&self, rep: u64) -> Result<Env<'_>> {
        let mut env = Env::new(
            &self.problem,
            &self.weights,
            self.config.channel.spec()?,
            self.config.schedules,
            Streams::replication(self.config.seed, rep),
        );
        env.guard = self.config.payload_guard;
        Ok(env)
    }

    /// Runs one replication.
    pub fn replicate(&self, rep: u64, sink: &mut Vec<IterateSummary>) -> Result<()> {
        let env = self.env(rep)?;
        simulate(self.config.algorithm, &env, &self.x_star, self.config.horizon, self.config.stride, sink)
    }

    /// Text printed before a run.
    pub fn describe(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} on {} agents ({} edges), {} channel, {} objective in dimension {}",
            c.algorithm,
            self.topology.n(),
            self.topology.edges().len(),
            c.channel.spec().map(|ch| ch.name()).unwrap_or("?"),
            match c.objective.kind {
                config::ObjectiveKind::Logistic => "logistic",
                config::ObjectiveKind::Quadratic => "quadratic",
            },
            self.problem.dim()
        );
        if let Some(sp) = self.spectral {
            let _ = writeln!(s, "eta_w = {:.6}", sp.eta_w);
        }
        if let Some(r) = &self.report {
            s.push_str(&r.to_string());
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Process exit status for an error: 2 for configuration and input
/// problems, 1 for failures during a run.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::InvalidInput(_) | Error::Parse { .. } | Error::Io { .. } | Error::Unsupported(_) => 2,
        _ => 1,
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub traces: Vec<Vec<IterateSummary>>,
    pub mean: Vec<IterateSummary>,
    /// Fit of the mean Lyapunov value over the last decade of rounds.
    pub fit: Option<RateFit>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn final_norm_gap(&self) -> f64 {
        self.mean.last().map_or(f64::NAN, |s| s.norm_gap)
    }
}

/// Default rate-fit window: the last decade `[K/10, K]`.
pub fn tail_window(horizon: u64) -> (u64, u64) {
    ((horizon / 10).max(1), horizon)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Runs every replication, writing into `config.out`: the effective config,
/// the condition report, one trace per replication and the mean trace.
/// On failure, `failure.txt` records the error and the last emitted row.
pub fn run(inst: &Instance) -> Result<RunOutput> {
    let cfg = &inst.config;
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let cfg_path = out.join("config.toml");
    write_file(&cfg_path, &cfg.to_toml()?)?;
    files.push(cfg_path);
    let report_path = out.join("report.txt");
    write_file(&report_path, &inst.describe())?;
    files.push(report_path);

    let work = |r: usize| {
        let mut rows = Vec::new();
        let res = inst.replicate(r as u64, &mut rows);
        (rows, res)
    };
    let results: Vec<(Vec<IterateSummary>, Result<()>)> = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {} workers: {e}", cfg.workers)))?;
        pool.install(|| (0..cfg.reps).into_par_iter().map(work).collect())
    } else {
        (0..cfg.reps).into_par_iter().map(work).collect()
    };

    let mut traces = Vec::with_capacity(results.len());
    let mut failure = None;
    for (r, (rows, res)) in results.into_iter().enumerate() {
        let path = out.join(format!("trace_rep{r:03}.csv"));
        trace::write_trace(&path, &rows)?;
        files.push(path);
        if let Err(e) = res {
            if failure.is_none() {
                let last = rows.last().map_or("none".to_string(), |s| format!("{s:?}"));
                let body = format!("replication {r} failed: {e}\nlast summary: {last}\n");
                write_file(&out.join("failure.txt"), &body)?;
                failure = Some(e);
            }
        }
        traces.push(rows);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let mean = trace::mean_trace(&traces)?;
    let mean_path = out.join("trace_mean.csv");
    trace::write_trace(&mean_path, &mean)?;
    files.push(mean_path);

    let series = traces.iter().map(|t| field_series(t, "lyap")).collect::<Result<Vec<_>>>()?;
    let fit = fit_rate(&series, tail_window(cfg.horizon)).ok();
    Ok(RunOutput { traces, mean, fit, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(overrides: &[(&str, &str)]) -> RunConfig {
        let dir = tempfile::tempdir().unwrap().keep();
        let mut o: Vec<(String, String)> = overrides.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        o.push(("out".into(), format!("\"{}\"", dir.join("out").display())));
        config::resolve(&ConfigSources { overrides: o, ..Default::default() }).unwrap()
    }

    #[test]
    fn stride_one_gives_one_row_per_round() {
        let cfg = small(&[("horizon", "10"), ("stride", "1"), ("graph.n", "4")]);
        let inst = prepare(cfg).unwrap();
        let out = run(&inst).unwrap();
        assert_eq!(out.mean.len(), 10);
        let text = std::fs::read_to_string(inst.config.out.join("trace_mean.csv")).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert_eq!(out.mean[0].norm_gap, 1.0);
    }

    #[test]
    fn rows_at_stride_and_horizon() {
        let cfg = small(&[("horizon", "25"), ("stride", "10"), ("graph.n", "4")]);
        let inst = prepare(cfg).unwrap();
        let mut rows = Vec::new();
        inst.replicate(0, &mut rows).unwrap();
        let ks: Vec<u64> = rows.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![1, 10, 20, 25]);
    }

    #[test]
    fn zero_horizon_emits_first_row() {
        let cfg = small(&[("graph.n", "4")]);
        let inst = prepare(cfg).unwrap();
        let env = inst.env(0).unwrap();
        let mut rows = Vec::new();
        simulate(Algorithm::VraDgt, &env, &inst.x_star, 0, 5, &mut rows).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].k, 1);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = small(&[("horizon", "50"), ("reps", "2"), ("algorithm", "vra-dsgt")]);
        let mut b = a.clone();
        b.out = a.out.with_file_name("other");
        run(&prepare(a.clone()).unwrap()).unwrap();
        run(&prepare(b.clone()).unwrap()).unwrap();
        for f in ["trace_rep000.csv", "trace_rep001.csv", "trace_mean.csv"] {
            assert_eq!(std::fs::read(a.out.join(f)).unwrap(), std::fs::read(b.out.join(f)).unwrap());
        }
    }

    #[test]
    fn missing_data_file_names_the_path() {
        let cfg = small(&[("objective.kind", "logistic"), ("objective.data", "\"/nonexistent/data.svm\"")]);
        let err = prepare(cfg).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/data.svm"), "{err}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn runtime_failures_exit_one_and_leave_a_diagnostic() {
        let cfg = small(&[("horizon", "50"), ("payload_guard", "1e-9"), ("graph.n", "4")]);
        let inst = prepare(cfg).unwrap();
        let err = run(&inst).unwrap_err();
        assert!(matches!(err, Error::Round { round: 1, .. }), "{err}");
        assert_eq!(exit_code(&err), 1);
        let text = std::fs::read_to_string(inst.config.out.join("failure.txt")).unwrap();
        assert!(text.contains("round 1"), "{text}");
    }
}
