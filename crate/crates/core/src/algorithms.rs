//! VRA-DGT, VRA-DSGT, the exact-communication DGT/SGT baselines, stepsize
//! schedules and the theorem-condition checker.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::objectives::Problem;
use crate::rng::{Purpose, Streams};
use crate::stack::Stack;
use crate::vra::{neighbor_sum, vra_error, vra_round, RoundNoise, DEFAULT_PAYLOAD_GUARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    VraDgt,
    VraDsgt,
    DgtBaseline,
    SgtBaseline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::VraDgt, Algorithm::VraDsgt, Algorithm::DgtBaseline, Algorithm::SgtBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::VraDgt => "vra-dgt",
            Algorithm::VraDsgt => "vra-dsgt",
            Algorithm::DgtBaseline => "dgt-baseline",
            Algorithm::SgtBaseline => "sgt-baseline",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::VraDsgt | Algorithm::SgtBaseline)
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Algorithm::DgtBaseline | Algorithm::SgtBaseline)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}` (expected vra-dgt, vra-dsgt, dgt-baseline or sgt-baseline)")))
    }
}

/// `alpha_k = a1/(k^alpha + b1)`, `beta_k = a2/(k^beta + b2)`,
/// `gamma_k = c1 alpha_k`, `lambda_k = c2 alpha_k`, plus the constant `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedules {
    pub a1: f64,
    pub b1: f64,
    pub alpha_exp: f64,
    pub a2: f64,
    pub b2: f64,
    pub beta_exp: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Schedule values at one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleValues {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_k: f64,
    pub lambda: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl Schedules {
    /// The experimental setting: `alpha_k = 0.05/(1 + 0.001 k^0.8)`,
    /// `gamma_k = lambda_k = 1/(1 + 0.001 k^0.8)`, `beta_k = 1e-7/(1 + k)`,
    /// `gamma = 0.99`.
    pub fn table1() -> Self {
        Self { a1: 50.0, b1: 1000.0, alpha_exp: 0.8, a2: 1e-7, b2: 1.0, beta_exp: 1.0, gamma: 0.99, c1: 20.0, c2: 20.0 }
    }

    /// A sublinear setting that is stable on well-conditioned synthetic
    /// problems: `alpha_k = 1.5/(k^0.8 + 20)`, `beta_k = 2/(k + 20)`,
    /// `gamma = 1`, `c1 = c2 = 20`.
    pub fn synthetic() -> Self {
        Self { a1: 1.5, b1: 20.0, alpha_exp: 0.8, a2: 2.0, b2: 20.0, beta_exp: 1.0, gamma: 1.0, c1: 20.0, c2: 20.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let all = [self.a1, self.b1, self.alpha_exp, self.a2, self.b2, self.beta_exp, self.gamma, self.c1, self.c2];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("schedule constants must be finite".into());
        }
        if self.a1 <= 0.0 || self.a2 <= 0.0 {
            return bad(format!("a1 and a2 must be > 0, got {} and {}", self.a1, self.a2));
        }
        if self.b1 < 0.0 || self.b2 < 0.0 {
            return bad(format!("b1 and b2 must be >= 0, got {} and {}", self.b1, self.b2));
        }
        if !(self.alpha_exp > 0.5 && self.alpha_exp <= 1.0) {
            return bad(format!("alpha exponent must lie in (1/2, 1], got {}", self.alpha_exp));
        }
        if self.beta_exp < self.alpha_exp {
            return bad(format!("beta exponent {} is below alpha exponent {}", self.beta_exp, self.alpha_exp));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.c1 <= 0.0 || self.c2 <= 0.0 {
            return bad(format!("c1 and c2 must be > 0, got {} and {}", self.c1, self.c2));
        }
        Ok(())
    }

    /// Values at round `k >= 1`. `beta_k`, `gamma_k` and `lambda_k` are
    /// clipped to 1.
    pub fn at(&self, k: u64) -> ScheduleValues {
        let kf = k.max(1) as f64;
        let alpha = self.a1 / (kf.powf(self.alpha_exp) + self.b1);
        let beta = (self.a2 / (kf.powf(self.beta_exp) + self.b2)).min(1.0);
        ScheduleValues {
            alpha,
            beta,
            gamma: self.gamma,
            gamma_k: (self.c1 * alpha).min(1.0),
            lambda: (self.c2 * alpha).min(1.0),
        }
    }
}

pub fn schedule_values(s: &Schedules, k: u64) -> ScheduleValues {
    s.at(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Deterministic gradients (VRA-DGT).
    One,
    /// Stochastic gradients (VRA-DSGT).
    Two,
}

/// Constants the theorem conditions depend on. For `Theorem::Two`, `l` is
/// the stochastic smoothness constant `L_xi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemConstants {
    pub mu: f64,
    pub l: f64,
    pub n: usize,
    pub eta_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionLine {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateCase {
    /// `alpha in (1/2, 1)`: rate `O(1/k^alpha)`.
    Sublinear,
    /// `alpha = beta = 1`: rate `O(1/k)`.
    Linear,
    /// The exponents fit neither case.
    Neither,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremReport {
    pub theorem: Theorem,
    pub case: RateCase,
    pub c1_threshold: f64,
    pub a1_threshold: Option<f64>,
    pub lines: Vec<ConditionLine>,
}

impl TheoremReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionLine> {
        self.lines.iter().filter(|l| !l.pass)
    }
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let which = match self.theorem {
            Theorem::One => "deterministic (VRA-DGT)",
            Theorem::Two => "stochastic (VRA-DSGT)",
        };
        let case = match self.case {
            RateCase::Sublinear => "case (i), rate O(1/k^alpha)",
            RateCase::Linear => "case (ii), rate O(1/k)",
            RateCase::Neither => "no rate case applies",
        };
        writeln!(f, "theorem conditions, {which}: {case}")?;
        for l in &self.lines {
            writeln!(f, "  [{}] {}: {}", if l.pass { "pass" } else { "FAIL" }, l.name, l.detail)?;
        }
        if !self.all_pass() {
            writeln!(f, "  warning: conditions not met; the run proceeds without the rate guarantee")?;
        }
        Ok(())
    }
}

fn line(name: &str, pass: bool, detail: String) -> ConditionLine {
    ConditionLine { name: name.to_string(), detail, pass }
}

/// Evaluates the stepsize conditions of the selected theorem. Never fails;
/// non-positive constants show up as failing lines.
pub fn check_theorem_conditions(pc: &ProblemConstants, s: &Schedules, which: Theorem) -> TheoremReport {
    let ProblemConstants { mu, l, n, eta_w: eta } = *pc;
    let nf = n as f64;
    let mut lines = Vec::new();
    lines.push(line(
        "problem constants",
        mu > 0.0 && l > 0.0 && n >= 1 && eta > 0.0 && eta <= 1.0,
        format!("mu = {mu:.6}, L = {l:.6}, n = {n}, eta_w = {eta:.6}"),
    ));
    let l2 = l * l;
    let c1_threshold = match which {
        Theorem::One => f64::max(16.0 * (4.0 * nf * nf * l2 + 1.0) / (3.0 * mu * nf * eta), 4.0 * 2f64.sqrt() * l / eta),
        Theorem::Two => [
            16.0 * (6.0 * nf * nf * l2 + 1.0) / (3.0 * mu * nf * eta),
            4.0 * 6f64.sqrt() * l / eta,
            4.0 * (3.0 / (eta * (8.0 - 3.0 * eta))).sqrt(),
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max),
    };
    lines.push(line("c1 lower bound", s.c1 > c1_threshold, format!("c1 = {} vs threshold {c1_threshold:.6e}", s.c1)));
    if which == Theorem::Two {
        lines.push(line("c2 >= c1", s.c2 >= s.c1, format!("c2 = {}, c1 = {}", s.c2, s.c1)));
    }
    lines.push(line(
        "a1, a2 > 0 and b1, b2 >= 0",
        s.a1 > 0.0 && s.a2 > 0.0 && s.b1 >= 0.0 && s.b2 >= 0.0,
        format!("a1 = {}, a2 = {}, b1 = {}, b2 = {}", s.a1, s.a2, s.b1, s.b2),
    ));

    let case = if s.alpha_exp == 1.0 && s.beta_exp == 1.0 {
        RateCase::Linear
    } else if s.alpha_exp > 0.5 && s.alpha_exp < 1.0 && s.beta_exp >= s.alpha_exp {
        RateCase::Sublinear
    } else {
        RateCase::Neither
    };
    let mut a1_threshold = None;
    match case {
        RateCase::Sublinear => {
            lines.push(line(
                "exponents",
                true,
                format!("alpha = {} in (1/2, 1), beta = {} >= alpha", s.alpha_exp, s.beta_exp),
            ));
        }
        RateCase::Linear => {
            lines.push(line(
                "a2 in (1, b2 + 1)",
                s.a2 > 1.0 && s.a2 < s.b2 + 1.0,
                format!("a2 = {}, b2 + 1 = {}", s.a2, s.b2 + 1.0),
            ));
            lines.push(line("b1 = b2", s.b1 == s.b2, format!("b1 = {}, b2 = {}", s.b1, s.b2)));
            let c1 = s.c1;
            let terms: Vec<f64> = match which {
                Theorem::One => vec![
                    c1 * eta / 2.0 - 16.0 * l2 / (c1 * eta),
                    0.75 * mu - (16.0 * nf * nf * l2 + 4.0) / (nf * c1 * eta),
                ],
                Theorem::Two => vec![
                    c1 * eta / 4.0 - 24.0 * l2 / (c1 * eta),
                    0.75 * mu - (24.0 * nf * nf * l2 + 4.0) / (nf * c1 * eta),
                    (8.0 * s.c2 - 3.0 * c1 * eta) / 4.0 - 12.0 / (c1 * eta),
                ],
            };
            let m = terms.iter().copied().fold(f64::INFINITY, f64::min);
            if m > 0.0 {
                let thr = 1.0 / m;
                a1_threshold = Some(thr);
                lines.push(line("a1 lower bound", s.a1 > thr, format!("a1 = {} vs threshold {thr:.6e}", s.a1)));
            } else {
                lines.push(line(
                    "a1 lower bound",
                    false,
                    format!("denominator min = {m:.6e} is not positive, so no a1 satisfies the bound"),
                ));
            }
        }
        RateCase::Neither => {
            lines.push(line(
                "exponents",
                false,
                format!("alpha = {}, beta = {} fit neither alpha in (1/2,1) with beta >= alpha nor alpha = beta = 1", s.alpha_exp, s.beta_exp),
            ));
        }
    }
    TheoremReport { theorem: which, case, c1_threshold, a1_threshold, lines }
}

/// Per-round algorithm state.
///
/// For the VRA methods `s` holds the cumulative trackers; for the baselines
/// it holds the instantaneous tracker `Y`. `q` is the stochastic-gradient
/// estimator of the stochastic methods.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgState {
    pub k: u64,
    pub x: Stack,
    pub s: Stack,
    pub zx: Stack,
    pub zs: Stack,
    pub q: Option<Stack>,
}

/// Everything observed during one round.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: u64,
    pub values: ScheduleValues,
    /// `X_k`.
    pub x: Stack,
    /// Tracker difference `Y_k = S_{k+1} - S_k` (the tracker itself for baselines).
    pub y: Stack,
    /// Exact local gradients at `X_k`.
    pub g: Stack,
    /// `Zx_k - (W - diag W) X_k`.
    pub ex: Stack,
    /// `Zs_k - (W - diag W) S_k`.
    pub es: Stack,
    /// `Q_k - G_k` for the stochastic methods.
    pub eq: Option<Stack>,
    /// Max-norm residuals of the VRA error recursion for the x and s rounds.
    pub residual_x: f64,
    pub residual_s: f64,
    pub max_payload: f64,
}

/// Fixed inputs shared by every round of one run.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub problem: &'a Problem,
    pub w: &'a WeightMatrix,
    pub channel: ChannelSpec,
    pub schedules: Schedules,
    pub streams: Streams,
    pub guard: f64,
}

impl<'a> Env<'a> {
    pub fn new(problem: &'a Problem, w: &'a WeightMatrix, channel: ChannelSpec, schedules: Schedules, streams: Streams) -> Self {
        Self { problem, w, channel, schedules, streams, guard: DEFAULT_PAYLOAD_GUARD }
    }

    fn check(&self) -> Result<()> {
        if self.w.n() != self.problem.agents() {
            return Err(Error::InvalidParameter(format!(
                "weight matrix has {} agents but the problem has {}",
                self.w.n(),
                self.problem.agents()
            )));
        }
        self.channel.validate()?;
        self.schedules.validate()
    }
}

/// Exact local gradients, one row per agent.
pub fn local_gradients(problem: &Problem, x: &Stack) -> Result<Stack> {
    let mut g = Stack::zeros(x.n(), x.d());
    for i in 0..x.n() {
        problem.local(i).gradient_into(x.row(i), g.row_mut(i))?;
    }
    Ok(g)
}

/// Stochastic gradients at `X` on the round-`round` sample of each agent.
pub fn sampled_gradients(problem: &Problem, streams: &Streams, round: u64, x: &Stack) -> Result<Stack> {
    let mut g = Stack::zeros(x.n(), x.d());
    for i in 0..x.n() {
        let oracle = problem.oracle(i);
        let mut rng = streams.stream(Purpose::Batch, round, i as u64, 0);
        let sample = oracle.draw(&mut rng);
        oracle.gradient_on(&sample, x.row(i), g.row_mut(i))?;
    }
    Ok(g)
}

impl AlgState {
    /// `X = S = Zx = Zs = 0` at `k = 1`.
    pub fn zero(n: usize, d: usize) -> Self {
        Self { k: 1, x: Stack::zeros(n, d), s: Stack::zeros(n, d), zx: Stack::zeros(n, d), zs: Stack::zeros(n, d), q: None }
    }

    /// Initial state for `alg`: zeros, plus `Q_1 = grad F(x_1; xi_1)` for
    /// the stochastic methods and `Y_1 = G(X_1)` (or `Q_1`) for the baselines.
    pub fn initial(alg: Algorithm, env: &Env<'_>) -> Result<Self> {
        env.check()?;
        let (n, d) = (env.problem.agents(), env.problem.dim());
        let mut st = Self::zero(n, d);
        match alg {
            Algorithm::VraDgt => {}
            Algorithm::VraDsgt => st.q = Some(sampled_gradients(env.problem, &env.streams, 1, &st.x)?),
            Algorithm::DgtBaseline => st.s = local_gradients(env.problem, &st.x)?,
            Algorithm::SgtBaseline => {
                let q = sampled_gradients(env.problem, &env.streams, 1, &st.x)?;
                st.s = q.clone();
                st.q = Some(q);
            }
        }
        Ok(st)
    }

    /// Sets both estimators to their exact targets `(W - diag W) X` and
    /// `(W - diag W) S`.
    pub fn seed_exact_estimators(&mut self, w: &WeightMatrix) {
        self.zx = neighbor_sum(w, &self.x);
        self.zs = neighbor_sum(w, &self.s);
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn d(&self) -> usize {
        self.x.d()
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.x.first_non_finite_row() {
            return Err(Error::NonFinite { what: "iterate", agent: i });
        }
        if let Some(i) = self.s.first_non_finite_row() {
            return Err(Error::NonFinite { what: "tracker", agent: i });
        }
        if let Some(i) = self.q.as_ref().and_then(Stack::first_non_finite_row) {
            return Err(Error::NonFinite { what: "gradient estimator", agent: i });
        }
        Ok(())
    }
}

/// `(1 - c) V + c (Z + diag(W) V)` row-wise.
fn mix(v: &Stack, z: &Stack, w: &WeightMatrix, c: f64) -> Stack {
    let mut out = Stack::zeros(v.n(), v.d());
    let keep = 1.0 - c;
    for i in 0..v.n() {
        let wii = w.diag(i);
        for ((o, vi), zi) in out.row_mut(i).iter_mut().zip(v.row(i)).zip(z.row(i)) {
            *o = keep * vi + c * (zi + wii * vi);
        }
    }
    out
}

/// Steps (1)-(2) of a VRA round: new trackers and iterates from the
/// gradient term `h` (`G` or `Q`).
struct Draft {
    s_new: Stack,
    x_new: Stack,
    y: Stack,
    ex: Stack,
    es: Stack,
}

fn draft(state: &AlgState, env: &Env<'_>, h: &Stack, v: &ScheduleValues) -> Draft {
    let es = vra_error(&state.zs, env.w, &state.s);
    let ex = vra_error(&state.zx, env.w, &state.x);
    let mut s_new = mix(&state.s, &state.zs, env.w, v.gamma);
    s_new.as_mut_slice().iter_mut().zip(h.as_slice()).for_each(|(a, b)| *a += b);
    let y = s_new.sub(&state.s);
    let mut x_new = mix(&state.x, &state.zx, env.w, v.gamma_k);
    x_new.as_mut_slice().iter_mut().zip(y.as_slice()).for_each(|(a, b)| *a -= v.alpha * b);
    Draft { s_new, x_new, y, ex, es }
}

/// Outputs of [`commit`] needed for the step record.
struct Committed {
    x_old: Stack,
    residual_s: f64,
    residual_x: f64,
    max_payload: f64,
}

/// Steps (3)-(4): the two VRA rounds, then the state moves to `k + 1`.
fn commit(state: &mut AlgState, env: &Env<'_>, d: &mut Draft, v: &ScheduleValues, q_new: Option<Stack>) -> Result<Committed> {
    let k = state.k;
    let noise = |purpose| RoundNoise { streams: &env.streams, purpose, round: k };
    let rs = vra_round(&d.s_new, &state.s, &state.zs, env.w, v.beta, &env.channel, noise(Purpose::NoiseS), env.guard)?;
    let rx = vra_round(&d.x_new, &state.x, &state.zx, env.w, v.beta, &env.channel, noise(Purpose::NoiseX), env.guard)?;
    let out = Committed {
        x_old: std::mem::replace(&mut state.x, std::mem::replace(&mut d.x_new, Stack::zeros(0, 0))),
        residual_s: rs.recursion_residual(&d.es, v.beta),
        residual_x: rx.recursion_residual(&d.ex, v.beta),
        max_payload: rs.max_payload.max(rx.max_payload),
    };
    state.s = std::mem::replace(&mut d.s_new, Stack::zeros(0, 0));
    state.zs = rs.z;
    state.zx = rx.z;
    if q_new.is_some() {
        state.q = q_new;
    }
    state.k += 1;
    state.check_finite()?;
    Ok(out)
}

/// One VRA-DGT round.
pub fn vra_dgt_step(state: &mut AlgState, env: &Env<'_>) -> Result<StepRecord> {
    let k = state.k;
    let mut inner = || -> Result<StepRecord> {
        let v = env.schedules.at(k);
        let g = local_gradients(env.problem, &state.x)?;
        let mut d = draft(state, env, &g, &v);
        let c = commit(state, env, &mut d, &v, None)?;
        Ok(StepRecord {
            k,
            values: v,
            x: c.x_old,
            y: d.y,
            g,
            ex: d.ex,
            es: d.es,
            eq: None,
            residual_x: c.residual_x,
            residual_s: c.residual_s,
            max_payload: c.max_payload,
        })
    };
    inner().map_err(|e| e.at_round(k))
}

/// One VRA-DSGT round. Each agent draws a single sample for round `k + 1`
/// and evaluates it at both `x_k` and `x_{k+1}`.
pub fn vra_dsgt_step(state: &mut AlgState, env: &Env<'_>) -> Result<StepRecord> {
    let k = state.k;
    let mut inner = || -> Result<StepRecord> {
        let v = env.schedules.at(k);
        let q = state.q.clone().ok_or_else(|| Error::InvalidState("stochastic estimator not initialized".into()))?;
        let g = local_gradients(env.problem, &state.x)?;
        let mut d = draft(state, env, &q, &v);
        let mut q_new = Stack::zeros(q.n(), q.d());
        let mut g_old = vec![0.0; q.d()];
        let keep = 1.0 - v.lambda;
        for i in 0..q.n() {
            let oracle = env.problem.oracle(i);
            let mut rng = env.streams.stream(Purpose::Batch, k + 1, i as u64, 0);
            let sample = oracle.draw(&mut rng);
            oracle.gradient_on(&sample, state.x.row(i), &mut g_old)?;
            let row = q_new.row_mut(i);
            oracle.gradient_on(&sample, d.x_new.row(i), row)?;
            for ((o, qi), go) in row.iter_mut().zip(q.row(i)).zip(&g_old) {
                *o += keep * (qi - go);
            }
        }
        let eq = q.sub(&g);
        let c = commit(state, env, &mut d, &v, Some(q_new))?;
        Ok(StepRecord {
            k,
            values: v,
            x: c.x_old,
            y: d.y,
            g,
            ex: d.ex,
            es: d.es,
            eq: Some(eq),
            residual_x: c.residual_x,
            residual_s: c.residual_s,
            max_payload: c.max_payload,
        })
    };
    inner().map_err(|e| e.at_round(k))
}

fn require_exact(env: &Env<'_>) -> Result<()> {
    if !env.channel.is_exact() {
        return Err(Error::InvalidParameter(format!(
            "the baselines assume exact communication; got the {} channel",
            env.channel.name()
        )));
    }
    Ok(())
}

/// Conventional DGT: `X' = W X - alpha_k Y`, `Y' = W Y + G(X') - G(X)`.
pub fn dgt_baseline_step(state: &mut AlgState, env: &Env<'_>) -> Result<StepRecord> {
    let k = state.k;
    let mut inner = || -> Result<StepRecord> {
        require_exact(env)?;
        let v = env.schedules.at(k);
        let w = env.w.matrix();
        let g = local_gradients(env.problem, &state.x)?;
        let mut x_new = state.x.left_mul(w);
        x_new.as_mut_slice().iter_mut().zip(state.s.as_slice()).for_each(|(a, y)| *a -= v.alpha * y);
        let g_new = local_gradients(env.problem, &x_new)?;
        let mut y_new = state.s.left_mul(w);
        for ((a, gn), go) in y_new.as_mut_slice().iter_mut().zip(g_new.as_slice()).zip(g.as_slice()) {
            *a += gn - go;
        }
        let x_old = std::mem::replace(&mut state.x, x_new);
        let y = std::mem::replace(&mut state.s, y_new);
        state.k += 1;
        state.check_finite()?;
        let (n, d) = (g.n(), g.d());
        Ok(StepRecord { k, values: v, x: x_old, y, g, ex: Stack::zeros(n, d), es: Stack::zeros(n, d), eq: None, residual_x: 0.0, residual_s: 0.0, max_payload: 0.0 })
    };
    inner().map_err(|e| e.at_round(k))
}

/// Stochastic gradient tracking: `X' = W X - alpha_k Y`,
/// `Q' = grad F(X'; xi_{k+1})`, `Y' = W Y + Q' - Q`.
pub fn sgt_baseline_step(state: &mut AlgState, env: &Env<'_>) -> Result<StepRecord> {
    let k = state.k;
    let mut inner = || -> Result<StepRecord> {
        require_exact(env)?;
        let v = env.schedules.at(k);
        let w = env.w.matrix();
        let q = state.q.clone().ok_or_else(|| Error::InvalidState("stochastic estimator not initialized".into()))?;
        let g = local_gradients(env.problem, &state.x)?;
        let mut x_new = state.x.left_mul(w);
        x_new.as_mut_slice().iter_mut().zip(state.s.as_slice()).for_each(|(a, y)| *a -= v.alpha * y);
        let q_new = sampled_gradients(env.problem, &env.streams, k + 1, &x_new)?;
        let mut y_new = state.s.left_mul(w);
        for ((a, qn), qo) in y_new.as_mut_slice().iter_mut().zip(q_new.as_slice()).zip(q.as_slice()) {
            *a += qn - qo;
        }
        let eq = q.sub(&g);
        let x_old = std::mem::replace(&mut state.x, x_new);
        let y = std::mem::replace(&mut state.s, y_new);
        state.q = Some(q_new);
        state.k += 1;
        state.check_finite()?;
        let (n, d) = (g.n(), g.d());
        Ok(StepRecord { k, values: v, x: x_old, y, g, ex: Stack::zeros(n, d), es: Stack::zeros(n, d), eq: Some(eq), residual_x: 0.0, residual_s: 0.0, max_payload: 0.0 })
    };
    inner().map_err(|e| e.at_round(k))
}

pub fn step(alg: Algorithm, state: &mut AlgState, env: &Env<'_>) -> Result<StepRecord> {
    match alg {
        Algorithm::VraDgt => vra_dgt_step(state, env),
        Algorithm::VraDsgt => vra_dsgt_step(state, env),
        Algorithm::DgtBaseline => dgt_baseline_step(state, env),
        Algorithm::SgtBaseline => sgt_baseline_step(state, env),
    }
}
