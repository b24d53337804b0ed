//! Cartesian parameter sweeps over configuration keys.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::runner::config::{self, ConfigSources, RunConfig};
use crate::runner::{prepare, run};

/// One swept key with its values, written `key=v1,v2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl GridAxis {
    pub fn parse(raw: &str) -> Result<Self> {
        let (key, vals) = config::parse_assignment(raw)?;
        let values: Vec<String> = vals.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
        if key.is_empty() || values.is_empty() {
            return Err(Error::InvalidParameter(format!("grid axis `{raw}` has no values")));
        }
        Ok(Self { key, values })
    }
}

/// All assignments of the Cartesian product, first axis varying slowest.
pub fn grid_points(axes: &[GridAxis]) -> Result<Vec<Vec<(String, String)>>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::InvalidParameter("parameter grid is empty".into()));
    }
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p: Vec<(String, String)>| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, String)>,
    pub out: PathBuf,
    pub final_norm_gap: f64,
    pub slope: Option<f64>,
    pub error: Option<String>,
}

/// Resolves every point of the grid on top of `base`. Point `i` runs with
/// seed `base.seed + i`, the base instance seed, its own output directory
/// `<out>/point_<i>` and the base cache directory.
pub fn sweep_configs(base: &ConfigSources, axes: &[GridAxis]) -> Result<Vec<(Vec<(String, String)>, RunConfig)>> {
    let points = grid_points(axes)?;
    let root = config::resolve(base)?;
    points
        .into_iter()
        .enumerate()
        .map(|(i, assignments)| {
            let out = root.out.join(format!("point_{i:03}"));
            let mut overrides = base.overrides.clone();
            overrides.extend(assignments.iter().cloned());
            overrides.push(("seed".into(), (root.seed + i as u64).to_string()));
            overrides.push(("instance_seed".into(), root.instance_seed().to_string()));
            overrides.push(("out".into(), config::quote(&out.display().to_string())));
            overrides.push(("cache_dir".into(), config::quote(&root.cache_dir().display().to_string())));
            let src = ConfigSources { overrides, ..base.clone() };
            Ok((assignments, config::resolve(&src)?))
        })
        .collect()
}

fn run_point(index: usize, assignments: Vec<(String, String)>, cfg: RunConfig) -> SweepPoint {
    let out = cfg.out.clone();
    let outcome = prepare(cfg).and_then(|inst| run(&inst));
    let (final_norm_gap, slope, error) = match outcome {
        Ok(o) => (o.final_norm_gap(), o.fit.map(|f| f.slope), None),
        Err(e) => (f64::NAN, None, Some(e.to_string())),
    };
    SweepPoint { index, assignments, out, final_norm_gap, slope, error }
}

/// Runs the grid points concurrently (up to `workers` threads when nonzero)
/// and writes `sweep.csv` into the base output directory. Configuration
/// errors abort before any run; a failed run is recorded and the sweep
/// continues.
pub fn sweep(base: &ConfigSources, axes: &[GridAxis]) -> Result<Vec<SweepPoint>> {
    let cfgs = sweep_configs(base, axes)?;
    let root_cfg = config::resolve(base)?;
    let root = root_cfg.out.clone();
    let go = || -> Vec<SweepPoint> {
        cfgs.into_par_iter().enumerate().map(|(i, (a, cfg))| run_point(i, a, cfg)).collect()
    };
    let results = if root_cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(root_cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {} workers: {e}", root_cfg.workers)))?
            .install(go)
    } else {
        go()
    };
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let path = root.join("sweep.csv");
    std::fs::write(&path, summary_csv(axes, &results)).map_err(|e| Error::io(&path, e))?;
    Ok(results)
}

pub fn summary_csv(axes: &[GridAxis], points: &[SweepPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["point".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(["final_norm_gap", "lyap_slope", "status"].map(String::from));
    w.write_record(&header).expect("in-memory write");
    for p in points {
        let mut rec = vec![p.index.to_string()];
        rec.extend(p.assignments.iter().map(|(_, v)| v.clone()));
        rec.push(format!("{:?}", p.final_norm_gap));
        rec.push(p.slope.map_or(String::new(), |s| format!("{s:?}")));
        rec.push(p.error.as_ref().map_or_else(|| "ok".to_string(), |e| format!("failed: {e}")));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_order() {
        let axes = vec![GridAxis::parse("a=1,2").unwrap(), GridAxis::parse("b=x,y,z").unwrap()];
        let pts = grid_points(&axes).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
        assert_eq!(pts[5], vec![("a".into(), "2".into()), ("b".into(), "z".into())]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(matches!(grid_points(&[]), Err(Error::InvalidParameter(_))));
        assert!(GridAxis::parse("a=").is_err());
        assert!(GridAxis::parse("a").is_err());
    }

    #[test]
    fn points_share_instance_and_cache() {
        let base = ConfigSources { overrides: vec![("seed".into(), "7".into())], ..Default::default() };
        let cfgs = sweep_configs(&base, &[GridAxis::parse("channel.sigma2=1,10").unwrap()]).unwrap();
        assert_eq!(cfgs[0].1.seed, 7);
        assert_eq!(cfgs[1].1.seed, 8);
        assert_eq!(cfgs[0].1.instance_seed(), cfgs[1].1.instance_seed());
        assert_eq!(cfgs[0].1.cache_dir(), cfgs[1].1.cache_dir());
        assert_ne!(cfgs[0].1.out, cfgs[1].1.out);
        assert_eq!(cfgs[1].1.channel.sigma2, 10.0);
    }
}
