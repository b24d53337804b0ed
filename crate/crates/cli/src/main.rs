use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vra_sim::runner::config::{self, quote, ConfigSources};
use vra_sim::runner::sweep::{self, GridAxis};
use vra_sim::runner::{exit_code, partition_dataset, plot, prepare, prepare_report, run};
use vra_sim::Error;

#[derive(Parser)]
#[command(name = "vra", version, about = "Gradient tracking over noisy and quantized channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its traces.
    Run(ConfigArgs),
    /// Run a configuration once per point of a parameter grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Grid axis `key=v1,v2,...`; repeat for a Cartesian product.
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
    },
    /// Plot one trace column against k as a log-log SVG.
    Plot {
        /// Trace CSV files; each becomes one line labelled by its file name.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "norm_gap")]
        field: String,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Split a LIBSVM data set across agents with a Dirichlet draw.
    Partition {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        concentration: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the step-size condition report for a configuration.
    Check(ConfigArgs),
}

/// Settings shared by `run`, `sweep` and `check`. Every flag is shorthand
/// for a config key; `--set` reaches the rest.
#[derive(Args)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (fig1-gaussian, fig1-quantizer, fig2-gaussian, fig2-quantizer).
    #[arg(long)]
    preset: Option<String>,
    /// vra-dgt, vra-dsgt, dgt-baseline or sgt-baseline [algorithm].
    #[arg(long)]
    algorithm: Option<String>,
    /// Number of agents [graph.n].
    #[arg(long)]
    n: Option<usize>,
    /// Chord probability of the ring-plus-random graph [graph.p].
    #[arg(long)]
    p: Option<f64>,
    /// metropolis or equal-neighbor [graph.weights].
    #[arg(long)]
    weights: Option<String>,
    /// exact, gaussian or quantizer [channel.kind].
    #[arg(long)]
    channel: Option<String>,
    /// Gaussian channel variance [channel.sigma2].
    #[arg(long)]
    sigma2: Option<f64>,
    /// Quantizer level [channel.delta].
    #[arg(long)]
    delta: Option<f64>,
    /// LIBSVM data file [objective.data].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of rounds K [horizon].
    #[arg(long)]
    horizon: Option<u64>,
    /// Rounds between trace rows [stride].
    #[arg(long)]
    stride: Option<u64>,
    /// Base seed; replication r uses seed + r [seed].
    #[arg(long)]
    seed: Option<u64>,
    /// Replications [reps].
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads, 0 for all cores [workers].
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory [out]; the default root comes from VRA_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any config key, e.g. `--set schedules.a1=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn sources(&self) -> Result<ConfigSources, Error> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("algorithm", self.algorithm.as_deref().map(quote));
        put("graph.n", self.n.map(|v| v.to_string()));
        put("graph.p", self.p.map(|v| format!("{v:?}")));
        put("graph.weights", self.weights.as_deref().map(quote));
        put("channel.kind", self.channel.as_deref().map(quote));
        put("channel.sigma2", self.sigma2.map(|v| format!("{v:?}")));
        put("channel.delta", self.delta.map(|v| format!("{v:?}")));
        put("objective.data", self.data.as_ref().map(|p| quote(&p.display().to_string())));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put("stride", self.stride.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("reps", self.reps.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| quote(&p.display().to_string())));
        for raw in &self.set {
            o.push(config::parse_assignment(raw)?);
        }
        Ok(ConfigSources { preset: self.preset.clone(), file: self.config.clone(), overrides: o })
    }
}

fn cmd_run(args: &ConfigArgs) -> Result<(), Error> {
    let cfg = config::resolve(&args.sources()?)?;
    let inst = prepare(cfg)?;
    print!("{}", inst.describe());
    let out = run(&inst)?;
    println!("wrote {} files to {}", out.files.len(), inst.config.out.display());
    println!("final norm_gap (mean over replications): {:.6e}", out.final_norm_gap());
    if let Some(fit) = &out.fit {
        println!("lyap slope over k in [{}, {}]: {:.4}", fit.k_lo, fit.k_hi, fit.slope);
    }
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs, grid: &[String]) -> Result<(), Error> {
    let axes = grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<Vec<_>, _>>()?;
    let points = sweep::sweep(&args.sources()?, &axes)?;
    let mut failed = 0;
    for p in &points {
        let label: Vec<String> = p.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
        match &p.error {
            None => println!(
                "point {:03} [{}]: final norm_gap {:.6e}, slope {}",
                p.index,
                label.join(" "),
                p.final_norm_gap,
                p.slope.map_or("n/a".into(), |s| format!("{s:.4}"))
            ),
            Some(e) => {
                failed += 1;
                println!("point {:03} [{}]: failed: {e}", p.index, label.join(" "));
            }
        }
    }
    if failed > 0 {
        return Err(Error::InvalidState(format!("{failed} of {} grid points failed", points.len())));
    }
    Ok(())
}

fn cmd_check(args: &ConfigArgs) -> Result<(), Error> {
    let cfg = config::resolve(&args.sources()?)?;
    let inst = prepare_report(cfg)?;
    print!("{}", inst.describe());
    if inst.report.is_none() {
        println!("condition report unavailable");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep { config, grid } => cmd_sweep(config, grid),
        Command::Plot { traces, field, out } => plot::plot_traces(traces, field, out),
        Command::Partition { data, n, concentration, seed, out } => partition_dataset(data, *n, *concentration, *seed)
            .and_then(|p| std::fs::write(out, p.to_csv()).map_err(|e| Error::io(out, e))),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
