//! On-disk cache of reference solutions keyed by a content hash of the
//! problem definition.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::objectives::{Objective, Problem};

/// Accumulates the bytes that define a problem.
#[derive(Clone, Default)]
pub struct ContentHash(Sha256);

impl ContentHash {
    pub fn new(tag: &str) -> Self {
        let mut h = Self(Sha256::new());
        h.bytes(tag.as_bytes());
        h
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn hex(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Hash of every local objective plus the solver tolerance.
pub fn problem_key(problem: &Problem, tol: f64) -> String {
    let mut h = ContentHash::new("vra-xstar-v1");
    h.u64(problem.agents() as u64).u64(problem.dim() as u64).f64(tol);
    for local in problem.locals() {
        match local {
            Objective::Logistic(o) => {
                h.bytes(b"logistic").f64(o.delta()).u64(o.shard().len() as u64);
                for (row, label) in o.samples() {
                    h.f64(label).u64(row.idx.len() as u64);
                    for (&i, &v) in row.idx.iter().zip(&row.val) {
                        h.u64(i as u64).f64(v);
                    }
                }
            }
            Objective::Quadratic(q) => {
                h.bytes(b"quadratic");
                q.matrix().iter().for_each(|v| {
                    h.f64(*v);
                });
                q.center().iter().for_each(|v| {
                    h.f64(*v);
                });
            }
        }
    }
    h.hex()
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("xstar-{key}.txt"))
}

/// Returns the cached vector, or `None` when absent or unreadable.
pub fn load(dir: &Path, key: &str, dim: usize) -> Option<Vec<f64>> {
    let text = std::fs::read_to_string(cache_path(dir, key)).ok()?;
    let v: Vec<f64> = text.lines().map(|l| l.trim().parse().ok()).collect::<Option<_>>()?;
    (v.len() == dim && v.iter().all(|x| x.is_finite())).then_some(v)
}

pub fn store(dir: &Path, key: &str, x: &[f64]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = cache_path(dir, key);
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let nonce = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".xstar-{key}.{}.{nonce}.tmp", std::process::id()));
    let body: String = x.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

/// Cached reference solution of `problem`, computing and storing it on a miss.
/// Returns the solution and whether it came from the cache.
pub fn reference_solution(problem: &Problem, dir: &Path, tol: f64, max_iter: usize) -> Result<(Vec<f64>, bool)> {
    let key = problem_key(problem, tol);
    if let Some(x) = load(dir, &key, problem.dim()) {
        return Ok((x, true));
    }
    let x = problem.reference_solution(tol, max_iter)?;
    store(dir, &key, &x)?;
    Ok((x, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{Dataset, LogisticObjective, NoiseModel};
    use std::sync::Arc;

    fn problem(delta: f64) -> Problem {
        let ds = Arc::new(Dataset::from_dense(&[vec![1.0, 0.5], vec![-0.5, 1.0], vec![0.2, -1.0]], vec![1.0, -1.0, 1.0]).unwrap());
        let locals = vec![
            Objective::Logistic(LogisticObjective::new(ds.clone(), vec![0, 1], delta).unwrap()),
            Objective::Logistic(LogisticObjective::new(ds, vec![2], delta).unwrap()),
        ];
        Problem::new(locals, NoiseModel::None).unwrap()
    }

    #[test]
    fn key_tracks_content() {
        assert_eq!(problem_key(&problem(0.1), 1e-10), problem_key(&problem(0.1), 1e-10));
        assert_ne!(problem_key(&problem(0.1), 1e-10), problem_key(&problem(0.2), 1e-10));
        assert_ne!(problem_key(&problem(0.1), 1e-10), problem_key(&problem(0.1), 1e-8));
    }

    #[test]
    fn second_lookup_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = problem(0.1);
        let (a, hit) = reference_solution(&p, dir.path(), 1e-10, 100_000).unwrap();
        assert!(!hit);
        let (b, hit) = reference_solution(&p, dir.path(), 1e-10, 100_000).unwrap();
        assert!(hit);
        assert_eq!(a, b);
    }
}
