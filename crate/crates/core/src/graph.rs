//! Agent topologies, mixing matrices and the spectral constant of a mixing
//! matrix.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance used for every stochasticity and symmetry check.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Undirected, connected agent graph without self-loops.
///
/// Edges are stored once as `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from an arbitrary list of pairs. Duplicates and
    /// reversed pairs collapse onto one canonical edge.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one agent".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {n} agents"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at agent {i}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let t = Self { n, edges, neighbors };
        if !t.is_connected() {
            return Err(Error::InvalidParameter("graph is not connected".into()));
        }
        Ok(t)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("a cycle needs n >= 3, got {n}")));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Star with agent 0 at the center.
    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// Ring over `n` agents plus every nonadjacent pair independently with
    /// probability `p`.
    pub fn ring_plus_random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("ring needs n >= 3, got {n}")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("link probability {p} not in [0, 1]")));
        }
        let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for i in 0..n {
            for j in i + 1..n {
                let on_ring = j == i + 1 || (i == 0 && j == n - 1);
                if !on_ring && rng.random::<f64>() < p {
                    pairs.push((i, j));
                }
            }
        }
        Self::new(n, pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn is_regular(&self) -> bool {
        self.neighbors.iter().all(|l| l.len() == self.neighbors[0].len())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Breadth-first reachability from agent 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// One `i j` pair per line, 0-indexed. The agent count is written as a
    /// leading `# n <count>` comment so isolated trailing agents survive.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n {}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let mut n_decl = None;
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse_err = |msg: String| Error::Parse { path: origin.into(), line: idx + 1, msg };
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("n") {
                    let v = it.next().ok_or_else(|| parse_err("missing agent count".into()))?;
                    n_decl = Some(v.parse::<usize>().map_err(|e| parse_err(e.to_string()))?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                let tok = it.next().ok_or_else(|| parse_err(format!("expected `i j`, got `{line}`")))?;
                tok.parse().map_err(|_| parse_err(format!("bad agent index `{tok}`")))
            };
            let (i, j) = (next()?, next()?);
            pairs.push((i, j));
        }
        let inferred = pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(1);
        Self::new(n_decl.unwrap_or(inferred), pairs)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Metropolis,
    EqualNeighbor,
    Custom,
}

/// Dense mixing matrix attached to a topology.
#[derive(Clone, Debug)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    kind: WeightKind,
    neighbors: Vec<Vec<usize>>,
}

/// Column-sum diagnostics for a row-stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticityReport {
    pub column_sums: Vec<f64>,
    pub doubly_stochastic: bool,
}

impl WeightMatrix {
    /// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, remainder on the diagonal.
    pub fn metropolis(t: &Topology) -> Self {
        let n = t.n();
        let mut w = DMatrix::zeros(n, n);
        for &(i, j) in t.edges() {
            let v = 1.0 / (1.0 + t.degree(i).max(t.degree(j)) as f64);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        fill_diagonal(&mut w, t);
        Self { w, kind: WeightKind::Metropolis, neighbors: t.neighbors.clone() }
    }

    /// `w_ij = 1 / (|N_i| + 1)` for neighbors. Row-stochastic always, doubly
    /// stochastic only on regular graphs.
    pub fn equal_neighbor(t: &Topology) -> (Self, StochasticityReport) {
        let n = t.n();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            let v = 1.0 / (t.degree(i) as f64 + 1.0);
            for &j in t.neighbors(i) {
                w[(i, j)] = v;
            }
        }
        fill_diagonal(&mut w, t);
        let m = Self { w, kind: WeightKind::EqualNeighbor, neighbors: t.neighbors.clone() };
        let column_sums = m.column_sums();
        let doubly_stochastic = column_sums.iter().all(|c| (c - 1.0).abs() <= STOCHASTIC_TOL);
        (m, StochasticityReport { column_sums, doubly_stochastic })
    }

    /// Validates a user-supplied matrix against the topology: nonnegative,
    /// row-stochastic, positive exactly on edges.
    pub fn custom(t: &Topology, w: DMatrix<f64>) -> Result<Self> {
        let n = t.n();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "weight matrix is {}x{}, graph has {n} agents",
                w.nrows(),
                w.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = w[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!("w[{i}][{j}] = {v} is not a nonnegative number")));
                }
                if i != j {
                    let edge = t.has_edge(i, j);
                    if edge && v <= 0.0 {
                        return Err(Error::InvalidParameter(format!("w[{i}][{j}] must be positive on an edge")));
                    }
                    if !edge && v != 0.0 {
                        return Err(Error::InvalidParameter(format!("w[{i}][{j}] must be zero off the edge set")));
                    }
                }
            }
            let row: f64 = w.row(i).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParameter(format!("row {i} sums to {row}")));
            }
        }
        Ok(Self { w, kind: WeightKind::Custom, neighbors: t.neighbors.clone() })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.w[(i, i)]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `W - diag(W)`: the weights VRA estimators aggregate.
    pub fn off_diagonal(&self) -> DMatrix<f64> {
        let mut m = self.w.clone();
        m.fill_diagonal(0.0);
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.w.row_iter().map(|r| r.sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.w.column_iter().map(|c| c.sum()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| (self.w[(i, j)] - self.w[(j, i)]).abs() <= tol))
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.row_sums().iter().chain(self.column_sums().iter()).all(|s| (s - 1.0).abs() <= tol)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.w.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn fill_diagonal(w: &mut DMatrix<f64>, t: &Topology) {
    for i in 0..t.n() {
        let off: f64 = t.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
}

/// Second-largest eigenvalue modulus and the derived constant `1 - rho2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralInfo {
    pub eta_w: f64,
    pub rho2: f64,
}

/// Spectral norm of `W_gamma - 11^T/n`, with `W_gamma = (1-gamma) I + gamma W`.
/// Only meaningful for symmetric `W`.
pub fn mixing_norm(w: &WeightMatrix, gamma: f64) -> f64 {
    let n = w.n();
    let avg = 1.0 / n as f64;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 - gamma } else { 0.0 };
        id + gamma * w.get(i, j) - avg
    });
    m.symmetric_eigenvalues().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Computes `eta_w = 1 - rho2` for a symmetric doubly stochastic matrix.
///
/// For such matrices `||W_gamma - 11^T/n||_2 = max(|1 - gamma + gamma*l|)`
/// over the nontrivial eigenvalues `l`, which is at most `1 - gamma*eta_w`.
pub fn compute_eta_w(w: &WeightMatrix) -> Result<SpectralInfo> {
    if !w.is_symmetric(STOCHASTIC_TOL) {
        return Err(Error::Unsupported(
            "spectral constant needs a symmetric matrix; equal-neighbor weights on irregular graphs are report-only".into(),
        ));
    }
    if !w.is_doubly_stochastic(STOCHASTIC_TOL) {
        return Err(Error::Unsupported("spectral constant needs a doubly stochastic matrix".into()));
    }
    let rho2 = mixing_norm(w, 1.0);
    let eta_w = 1.0 - rho2;
    if eta_w <= STOCHASTIC_TOL {
        return Err(Error::InvalidParameter(format!(
            "mixing matrix does not contract the disagreement subspace (rho2 = {rho2})"
        )));
    }
    Ok(SpectralInfo { eta_w, rho2 })
}
