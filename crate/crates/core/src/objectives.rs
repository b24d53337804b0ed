//! Local cost functions, gradient oracles, data ingestion and partitioning,
//! and the centralized reference solution.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::stack::dot;

/// One sparse feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseRow {
    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i as usize]).sum()
    }

    #[inline]
    pub fn axpy_into(&self, scale: f64, out: &mut [f64]) {
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] += scale * v;
        }
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.axpy_into(1.0, &mut out);
        out
    }
}

/// Labelled samples with labels in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput("row and label counts differ".into()));
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("dataset has no samples".into()));
        }
        if let Some(b) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::InvalidInput(format!("label {b} is not +1 or -1")));
        }
        if rows.iter().flat_map(|r| &r.idx).any(|&i| i as usize >= dim) {
            return Err(Error::InvalidInput("feature index beyond dimension".into()));
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn from_dense(features: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        let rows = features
            .iter()
            .map(|f| {
                let (idx, val) = f
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i as u32, *v))
                    .unzip();
                SparseRow { idx, val }
            })
            .collect();
        Self::new(rows, labels, dim)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, s: usize) -> &SparseRow {
        &self.rows[s]
    }

    pub fn label(&self, s: usize) -> f64 {
        self.labels[s]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Appends a constant-one feature as the last coordinate.
    pub fn with_bias(mut self) -> Self {
        let b = self.dim as u32;
        for r in &mut self.rows {
            r.idx.push(b);
            r.val.push(1.0);
        }
        self.dim += 1;
        self
    }

    /// Keeps the given samples, in order.
    pub fn select(&self, samples: &[usize]) -> Result<Self> {
        let rows = samples.iter().map(|&s| self.rows[s].clone()).collect();
        let labels = samples.iter().map(|&s| self.labels[s]).collect();
        Self::new(rows, labels, self.dim)
    }

    /// Uniform random subset of `count` distinct samples (sorted by index).
    pub fn random_subset<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Self> {
        if count == 0 || count > self.len() {
            return Err(Error::InvalidParameter(format!(
                "subset size {count} not in 1..={}",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        idx.truncate(count);
        idx.sort_unstable();
        self.select(&idx)
    }
}

fn parse_label(tok: &str) -> Option<f64> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(1.0)
    } else if v == 2.0 || v == -1.0 {
        Some(-1.0)
    } else {
        None
    }
}

/// Parses LIBSVM sparse text (`label idx:val ...`, 1-based indices).
///
/// Labels `{1, 2}` map to `{+1, -1}`; `{+1, -1}` pass through. The feature
/// dimension is the largest index seen.
pub fn parse_libsvm_str(text: &str, origin: &Path) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: origin.into(), line: lineno + 1, msg };
        let mut toks = line.split_whitespace();
        let lab_tok = toks.next().unwrap_or("");
        let label = parse_label(lab_tok).ok_or_else(|| err(format!("bad label `{lab_tok}`")))?;
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, got `{tok}`")))?;
            let i: usize = i.parse().map_err(|_| err(format!("bad feature index in `{tok}`")))?;
            let v: f64 = v.parse().map_err(|_| err(format!("bad feature value in `{tok}`")))?;
            if i == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if !v.is_finite() {
                return Err(err(format!("non-finite feature value in `{tok}`")));
            }
            if idx.last().is_some_and(|&last: &u32| last as usize >= i - 1) {
                return Err(err(format!("feature indices not increasing at `{tok}`")));
            }
            dim = dim.max(i);
            if v != 0.0 {
                idx.push((i - 1) as u32);
                val.push(v);
            }
        }
        rows.push(SparseRow { idx, val });
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no samples", origin.display())));
    }
    Dataset::new(rows, labels, dim)
}

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm_str(&text, path)
}

/// Disjoint assignment of sample indices to agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    shards: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(shards: Vec<Vec<usize>>, n_samples: usize) -> Result<Self> {
        let mut seen = vec![false; n_samples];
        for (a, shard) in shards.iter().enumerate() {
            if shard.is_empty() {
                return Err(Error::InvalidInput(format!("agent {a} has no samples")));
            }
            for &s in shard {
                if s >= n_samples || std::mem::replace(&mut seen[s], true) {
                    return Err(Error::InvalidInput(format!("sample {s} duplicated or out of range")));
                }
            }
        }
        if let Some(s) = seen.iter().position(|v| !v) {
            return Err(Error::InvalidInput(format!("sample {s} is not assigned")));
        }
        Ok(Self { shards })
    }

    pub fn agents(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, agent: usize) -> &[usize] {
        &self.shards[agent]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(Vec::len).collect()
    }

    /// Gini coefficient of the shard sizes (0 = perfectly even).
    pub fn size_gini(&self) -> f64 {
        let mut s: Vec<f64> = self.sizes().into_iter().map(|v| v as f64).collect();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let total: f64 = s.iter().sum();
        let weighted: f64 = s.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum();
        (2.0 * weighted) / (n * total) - (n + 1.0) / n
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,sample_index\n");
        for (a, shard) in self.shards.iter().enumerate() {
            for s in shard {
                let _ = writeln!(out, "{a},{s}");
            }
        }
        out
    }

    pub fn parse_csv(text: &str, n_samples: usize, origin: &Path) -> Result<Self> {
        let mut shards: Vec<Vec<usize>> = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let err = || Error::Parse { path: origin.into(), line: lineno + 1, msg: format!("expected `agent,sample_index`, got `{line}`") };
            let (a, s) = line.split_once(',').ok_or_else(err)?;
            let a: usize = a.trim().parse().map_err(|_| err())?;
            let s: usize = s.trim().parse().map_err(|_| err())?;
            if shards.len() <= a {
                shards.resize(a + 1, Vec::new());
            }
            shards[a].push(s);
        }
        Self::new(shards, n_samples)
    }
}

/// Largest-remainder rounding of `weights * total` to integers summing to `total`.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Non-iid split: per label class, proportions drawn from a symmetric
/// Dirichlet with concentration `conc`, rounded by largest remainder. Agents
/// left empty take one sample from the currently largest shard.
pub fn dirichlet_partition<R: Rng + ?Sized>(ds: &Dataset, n: usize, conc: f64, rng: &mut R) -> Result<Partition> {
    if n == 0 || ds.len() < n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {} samples across {n} agents",
            ds.len()
        )));
    }
    if !(conc.is_finite() && conc > 0.0) {
        return Err(Error::InvalidParameter(format!("concentration must be > 0, got {conc}")));
    }
    let gamma = Gamma::new(conc, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut shards = vec![Vec::new(); n];
    for class in [-1.0, 1.0] {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&s| ds.label(s) == class).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let mut p: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = p.iter().sum();
        if total > 0.0 && total.is_finite() {
            p.iter_mut().for_each(|v| *v /= total);
        } else {
            // every gamma draw underflowed: put the class on one agent
            p.fill(0.0);
            p[rng.random_range(0..n)] = 1.0;
        }
        let counts = largest_remainder(&p, members.len());
        let mut it = members.into_iter();
        for (shard, c) in shards.iter_mut().zip(counts) {
            shard.extend(it.by_ref().take(c));
        }
    }
    while let Some(empty) = shards.iter().position(Vec::is_empty) {
        let donor = (0..n).max_by(|&a, &b| shards[a].len().cmp(&shards[b].len()).then(b.cmp(&a))).unwrap();
        let moved = shards[donor].pop().expect("donor shard is non-empty");
        shards[empty].push(moved);
    }
    for shard in &mut shards {
        shard.sort_unstable();
    }
    Partition::new(shards, ds.len())
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `(1/|S|) sum_{s in S} log(1 + exp(-b_s <a_s, x>)) + delta ||x||^2`.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    data: Arc<Dataset>,
    shard: Vec<usize>,
    delta: f64,
}

impl LogisticObjective {
    pub fn new(data: Arc<Dataset>, shard: Vec<usize>, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("regularization must be > 0, got {delta}")));
        }
        if shard.is_empty() {
            return Err(Error::InvalidState("empty shard".into()));
        }
        if shard.iter().any(|&s| s >= data.len()) {
            return Err(Error::InvalidParameter("shard index out of range".into()));
        }
        Ok(Self { data, shard, delta })
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn shard(&self) -> &[usize] {
        &self.shard
    }

    /// `(row, label)` for every sample of the shard.
    pub fn samples(&self) -> impl Iterator<Item = (&SparseRow, f64)> + '_ {
        self.shard.iter().map(|&s| (self.data.row(s), self.data.label(s)))
    }

    /// Smoothness constant of the single-sample losses: `max ||a||^2 / 4 + 2 delta`.
    pub fn sample_smoothness(&self) -> f64 {
        let max_sq = self.samples().map(|(r, _)| r.val.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
        max_sq / 4.0 + 2.0 * self.delta
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!("point has dimension {}, expected {}", x.len(), self.dim())));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let loss: f64 = self
            .shard
            .iter()
            .map(|&s| softplus(-self.data.label(s) * self.data.row(s).dot(x)))
            .sum();
        Ok(loss / self.shard.len() as f64 + self.delta * dot(x, x))
    }

    /// Gradient averaged over `samples` (indices into the dataset).
    fn gradient_on(&self, samples: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().zip(x).for_each(|(o, xi)| *o = 2.0 * self.delta * xi);
        let inv = 1.0 / samples.len() as f64;
        for &s in samples {
            let b = self.data.label(s);
            let row = self.data.row(s);
            let coef = -b * sigmoid(-b * row.dot(x)) * inv;
            row.axpy_into(coef, out);
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        self.gradient_on(&self.shard, x, out);
        Ok(())
    }

    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g)?;
        Ok((self.value(x)?, g))
    }

    /// `lambda_max(sum a a^T) / (4 |S|) + 2 delta`.
    pub fn smoothness_bound(&self) -> f64 {
        let d = self.dim();
        let mut gram = DMatrix::<f64>::zeros(d, d);
        for &s in &self.shard {
            let r = self.data.row(s);
            for (&i, &vi) in r.idx.iter().zip(&r.val) {
                for (&j, &vj) in r.idx.iter().zip(&r.val) {
                    gram[(i as usize, j as usize)] += vi * vj;
                }
            }
        }
        let lmax = gram.symmetric_eigenvalues().max();
        lmax / (4.0 * self.shard.len() as f64) + 2.0 * self.delta
    }

    pub fn strong_convexity_bound(&self) -> f64 {
        2.0 * self.delta
    }
}

/// `0.5 (x - c)^T A (x - c)` with symmetric positive definite `A`.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    c: DVector<f64>,
    mu: f64,
    l: f64,
}

impl QuadraticObjective {
    pub fn new(a: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != c.len() {
            return Err(Error::InvalidParameter("quadratic shape mismatch".into()));
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 * (1.0 + a.amax()) {
            return Err(Error::InvalidParameter("quadratic matrix is not symmetric".into()));
        }
        let eig = a.clone().symmetric_eigenvalues();
        let (mu, l) = (eig.min(), eig.max());
        if mu <= 0.0 {
            return Err(Error::InvalidParameter(format!("quadratic matrix is not positive definite (min eigenvalue {mu})")));
        }
        Ok(Self { a, c, mu, l })
    }

    /// Random rotation of a spectrum spread evenly over `[mu, l]` (both ends
    /// included when `d >= 2`), centered at a standard normal point scaled by
    /// `center_scale`.
    pub fn random<R: Rng + ?Sized>(d: usize, mu: f64, l: f64, center_scale: f64, rng: &mut R) -> Result<Self> {
        if d == 0 || !(mu > 0.0 && l >= mu) {
            return Err(Error::InvalidParameter(format!("need d >= 1 and 0 < mu <= L, got d={d}, mu={mu}, L={l}")));
        }
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let spectrum = DVector::from_fn(d, |i, _| {
            if d == 1 { mu } else { mu + (l - mu) * i as f64 / (d - 1) as f64 }
        });
        let mut a = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
        a = (&a + a.transpose()) * 0.5;
        let c = DVector::from_fn(d, |_, _| center_scale * rng.sample::<f64, _>(StandardNormal));
        Self::new(a, c)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = DVector::from_column_slice(x) - &self.c;
        0.5 * r.dot(&(&self.a * &r))
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|j| self.a[(i, j)] * (x[j] - self.c[j])).sum();
        }
    }

    pub fn smoothness_bound(&self) -> f64 {
        self.l
    }

    pub fn strong_convexity_bound(&self) -> f64 {
        self.mu
    }
}

/// `x* = (sum A_i)^{-1} sum A_i c_i`.
pub fn quadratic_optimum(objs: &[QuadraticObjective]) -> Result<Vec<f64>> {
    let first = objs.first().ok_or_else(|| Error::InvalidParameter("no objectives".into()))?;
    let d = first.dim();
    let mut a = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for q in objs {
        a += &q.a;
        rhs += &q.a * &q.c;
    }
    let chol = a.cholesky().ok_or_else(|| Error::InvalidParameter("sum of quadratic matrices is singular".into()))?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

/// A local cost `f_i`.
#[derive(Clone, Debug)]
pub enum Objective {
    Logistic(LogisticObjective),
    Quadratic(QuadraticObjective),
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Logistic(o) => o.dim(),
            Objective::Quadratic(o) => o.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Objective::Logistic(o) => o.value(x),
            Objective::Quadratic(o) => Ok(o.value(x)),
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        match self {
            Objective::Logistic(o) => o.gradient_into(x, out),
            Objective::Quadratic(o) => {
                o.gradient_into(x, out);
                Ok(())
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g)?;
        Ok(g)
    }

    pub fn smoothness_bound(&self) -> f64 {
        match self {
            Objective::Logistic(o) => o.smoothness_bound(),
            Objective::Quadratic(o) => o.smoothness_bound(),
        }
    }

    pub fn strong_convexity_bound(&self) -> f64 {
        match self {
            Objective::Logistic(o) => o.strong_convexity_bound(),
            Objective::Quadratic(o) => o.strong_convexity_bound(),
        }
    }
}

/// How stochastic gradients `grad F_i(x; xi)` are produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// Exact gradients.
    None,
    /// Logistic: average over `batch` samples drawn uniformly with
    /// replacement from the shard. A batch at least the shard size uses the
    /// full shard.
    MiniBatch { batch: usize },
    /// Additive `N(0, sigma2 / d)` per coordinate, so `E||noise||^2 = sigma2`.
    Additive { sigma2: f64 },
}

/// A realized sample `xi`: evaluating two points on the same sample gives the
/// shared-sample gradient pair.
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    Full,
    Indices(Vec<usize>),
    Additive(Vec<f64>),
}

/// Stochastic first-order oracle over one local objective.
#[derive(Clone, Copy, Debug)]
pub struct StochasticOracle<'a> {
    objective: &'a Objective,
    model: NoiseModel,
}

impl<'a> StochasticOracle<'a> {
    pub fn new(objective: &'a Objective, model: NoiseModel) -> Result<Self> {
        match (objective, model) {
            (_, NoiseModel::None) => {}
            (Objective::Logistic(o), NoiseModel::MiniBatch { batch }) => {
                if o.shard.is_empty() {
                    return Err(Error::InvalidState("empty shard".into()));
                }
                if batch == 0 {
                    return Err(Error::InvalidParameter("batch size must be >= 1".into()));
                }
            }
            (_, NoiseModel::Additive { sigma2 }) if sigma2 >= 0.0 && sigma2.is_finite() => {}
            (_, m) => {
                return Err(Error::InvalidParameter(format!("noise model {m:?} does not fit this objective")));
            }
        }
        Ok(Self { objective, model })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        match (self.objective, self.model) {
            (Objective::Logistic(o), NoiseModel::MiniBatch { batch }) if batch < o.shard.len() => {
                Sample::Indices((0..batch).map(|_| o.shard[rng.random_range(0..o.shard.len())]).collect())
            }
            (_, NoiseModel::Additive { sigma2 }) if sigma2 > 0.0 => {
                let d = self.objective.dim();
                let sd = (sigma2 / d as f64).sqrt();
                Sample::Additive((0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            _ => Sample::Full,
        }
    }

    pub fn gradient_on(&self, sample: &Sample, x: &[f64], out: &mut [f64]) -> Result<()> {
        match (sample, self.objective) {
            (Sample::Full, obj) => obj.gradient_into(x, out),
            (Sample::Indices(idx), Objective::Logistic(o)) => {
                o.check_dim(x)?;
                o.gradient_on(idx, x, out);
                Ok(())
            }
            (Sample::Additive(noise), obj) => {
                obj.gradient_into(x, out)?;
                out.iter_mut().zip(noise).for_each(|(o, z)| *o += z);
                Ok(())
            }
            (Sample::Indices(_), _) => Err(Error::InvalidState("index sample on a non-sample objective".into())),
        }
    }

    pub fn stochastic_grad<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let sample = self.draw(rng);
        let mut g = vec![0.0; x.len()];
        self.gradient_on(&sample, x, &mut g)?;
        Ok(g)
    }

    /// Both gradients evaluated on one shared sample.
    pub fn stochastic_grad_pair<R: Rng + ?Sized>(
        &self,
        x_old: &[f64],
        x_new: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let sample = self.draw(rng);
        let mut g_old = vec![0.0; x_old.len()];
        let mut g_new = vec![0.0; x_new.len()];
        self.gradient_on(&sample, x_old, &mut g_old)?;
        self.gradient_on(&sample, x_new, &mut g_new)?;
        Ok((g_old, g_new))
    }
}

/// A full decentralized problem: one local objective per agent.
#[derive(Clone, Debug)]
pub struct Problem {
    locals: Vec<Objective>,
    noise: NoiseModel,
}

impl Problem {
    pub fn new(locals: Vec<Objective>, noise: NoiseModel) -> Result<Self> {
        let d = locals.first().ok_or_else(|| Error::InvalidParameter("problem has no agents".into()))?.dim();
        if locals.iter().any(|o| o.dim() != d) {
            return Err(Error::InvalidParameter("local objectives disagree on dimension".into()));
        }
        for o in &locals {
            StochasticOracle::new(o, noise)?;
        }
        Ok(Self { locals, noise })
    }

    pub fn agents(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn local(&self, i: usize) -> &Objective {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[Objective] {
        &self.locals
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        Self::new(self.locals.clone(), noise)
    }

    pub fn oracle(&self, i: usize) -> StochasticOracle<'_> {
        StochasticOracle { objective: &self.locals[i], model: self.noise }
    }

    /// `f(x) = (1/n) sum f_i(x)`.
    pub fn global_value(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for o in &self.locals {
            acc += o.value(x)?;
        }
        Ok(acc / self.agents() as f64)
    }

    pub fn global_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut g = vec![0.0; d];
        for o in &self.locals {
            o.gradient_into(x, &mut g)?;
            acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let inv = 1.0 / self.agents() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Ok(acc)
    }

    /// Largest local smoothness bound.
    pub fn smoothness(&self) -> f64 {
        self.locals.iter().map(Objective::smoothness_bound).fold(0.0, f64::max)
    }

    /// Smoothness constant of the sampled gradients: per-sample for
    /// mini-batches, the local constant otherwise.
    pub fn stochastic_smoothness(&self) -> f64 {
        self.locals
            .iter()
            .map(|o| match (o, self.noise) {
                (Objective::Logistic(l), NoiseModel::MiniBatch { .. }) => l.sample_smoothness(),
                (o, _) => o.smoothness_bound(),
            })
            .fold(0.0, f64::max)
    }

    /// Strong-convexity bound for the global average.
    pub fn strong_convexity(&self) -> f64 {
        match &self.locals[0] {
            Objective::Quadratic(_) => {
                let d = self.dim();
                let mut a = DMatrix::zeros(d, d);
                for o in &self.locals {
                    if let Objective::Quadratic(q) = o {
                        a += q.matrix();
                    }
                }
                (a / self.agents() as f64).symmetric_eigenvalues().min()
            }
            Objective::Logistic(_) => self.locals.iter().map(Objective::strong_convexity_bound).fold(f64::INFINITY, f64::min),
        }
    }

    /// Minimizer of the global cost, by gradient descent with Armijo
    /// backtracking until `||grad f|| <= tol`.
    pub fn reference_solution(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        centralized_reference_solution(self, tol, max_iter)
    }
}

/// Gradient descent with backtracking on `f = (1/n) sum f_i` from the origin.
pub fn centralized_reference_solution(problem: &Problem, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let d = problem.dim();
    let mut x = vec![0.0; d];
    let mut fx = problem.global_value(&x)?;
    let mut g = problem.global_gradient(&x)?;
    // 1/L always decreases f, so backtracking never goes below it; this keeps
    // progress once value differences fall under rounding error.
    let min_step = 1.0 / problem.smoothness().max(f64::MIN_POSITIVE);
    let mut step = min_step;
    let mut trial = vec![0.0; d];
    for iter in 0..max_iter {
        let gnorm2 = dot(&g, &g);
        if gnorm2.sqrt() <= tol {
            return Ok(x);
        }
        step *= 2.0;
        loop {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *t = xi - step * gi;
            }
            let ft = problem.global_value(&trial)?;
            if ft <= fx - 0.5 * step * gnorm2 || step <= min_step {
                fx = ft;
                break;
            }
            step = (step * 0.5).max(min_step);
        }
        std::mem::swap(&mut x, &mut trial);
        g = problem.global_gradient(&x)?;
        if !fx.is_finite() {
            return Err(Error::NotConverged { iterations: iter, grad_norm: f64::NAN });
        }
    }
    let grad_norm = dot(&g, &g).sqrt();
    if grad_norm <= tol {
        Ok(x)
    } else {
        Err(Error::NotConverged { iterations: max_iter, grad_norm })
    }
}
