//! Error decomposition, Lyapunov values, empirical rate fits and the VRA
//! decay probe.

use rayon::prelude::*;

use crate::algorithms::StepRecord;
use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::rng::{Purpose, Streams};
use crate::stack::{dist_sq, Stack};
use crate::vra::{neighbor_sum, vra_round, RoundNoise, DEFAULT_PAYLOAD_GUARD};

/// Per-round metrics. All squared norms are Frobenius norms of stacked
/// matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateSummary {
    pub k: u64,
    /// `||xbar_k - x*||^2`.
    pub opt_gap: f64,
    /// `opt_gap` relative to its value at `k = 1`.
    pub norm_gap: f64,
    /// `||X_k - 1 xbar_k^T||^2`.
    pub agree: f64,
    /// `||Y_k - 1 ybar_k^T||^2`.
    pub track: f64,
    /// `track + agree + opt_gap`, plus `e_q2` for the stochastic methods.
    pub lyap: f64,
    pub e_x2: f64,
    pub e_s2: f64,
    pub e_q2: f64,
    pub alpha_k: f64,
    pub beta_k: f64,
    pub gamma_k: f64,
    pub lambda_k: f64,
}

impl IterateSummary {
    pub const FIELDS: [&'static str; 13] = [
        "k", "opt_gap", "norm_gap", "agree", "track", "lyap", "e_x2", "e_s2", "e_q2", "alpha_k", "beta_k", "gamma_k", "lambda_k",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.k as f64,
            self.opt_gap,
            self.norm_gap,
            self.agree,
            self.track,
            self.lyap,
            self.e_x2,
            self.e_s2,
            self.e_q2,
            self.alpha_k,
            self.beta_k,
            self.gamma_k,
            self.lambda_k,
        ]
    }

    pub fn field(&self, name: &str) -> Option<f64> {
        Self::FIELDS.iter().position(|f| *f == name).map(|i| self.values()[i])
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() != 13 {
            return Err(Error::InvalidInput(format!("expected 13 trace fields, got {}", v.len())));
        }
        Ok(Self {
            k: v[0] as u64,
            opt_gap: v[1],
            norm_gap: v[2],
            agree: v[3],
            track: v[4],
            lyap: v[5],
            e_x2: v[6],
            e_s2: v[7],
            e_q2: v[8],
            alpha_k: v[9],
            beta_k: v[10],
            gamma_k: v[11],
            lambda_k: v[12],
        })
    }
}

/// `||x_i - xbar||^2` summed over agents, with `xbar` the row mean.
fn spread(x: &Stack) -> (Vec<f64>, f64) {
    let mean = x.mean_row();
    let s = x.rows().map(|r| dist_sq(r, &mean)).sum();
    (mean, s)
}

/// Builds the summary of one round.
///
/// `initial_gap` is the optimality gap at `k = 1`; pass `None` for the first
/// round, whose normalized gap is 1 by definition.
pub fn summarize(rec: &StepRecord, x_star: Option<&[f64]>, initial_gap: Option<f64>) -> Result<IterateSummary> {
    let x_star = x_star.ok_or_else(|| Error::InvalidState("reference solution x* is not available".into()))?;
    if x_star.len() != rec.x.d() {
        return Err(Error::InvalidState(format!(
            "reference solution has dimension {}, iterates have {}",
            x_star.len(),
            rec.x.d()
        )));
    }
    let (xbar, agree) = spread(&rec.x);
    let (_, track) = spread(&rec.y);
    let opt_gap = dist_sq(&xbar, x_star);
    let norm_gap = match initial_gap {
        None => 1.0,
        Some(g0) if g0 > 0.0 => opt_gap / g0,
        Some(_) => opt_gap,
    };
    let e_q2 = rec.eq.as_ref().map_or(0.0, Stack::norm_sq);
    let v = rec.values;
    Ok(IterateSummary {
        k: rec.k,
        opt_gap,
        norm_gap,
        agree,
        track,
        lyap: track + agree + opt_gap + e_q2,
        e_x2: rec.ex.norm_sq(),
        e_s2: rec.es.norm_sq(),
        e_q2,
        alpha_k: v.alpha,
        beta_k: v.beta,
        gamma_k: v.gamma_k,
        lambda_k: v.lambda,
    })
}

/// Tracks the initial gap across a run.
#[derive(Clone, Debug)]
pub struct Summarizer {
    x_star: Vec<f64>,
    initial_gap: Option<f64>,
}

impl Summarizer {
    pub fn new(x_star: Vec<f64>) -> Self {
        Self { x_star, initial_gap: None }
    }

    pub fn summarize(&mut self, rec: &StepRecord) -> Result<IterateSummary> {
        let s = summarize(rec, Some(&self.x_star), self.initial_gap)?;
        if self.initial_gap.is_none() {
            self.initial_gap = Some(s.opt_gap);
        }
        Ok(s)
    }
}

/// Least-squares fit of `log value = intercept + slope log k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub k_lo: u64,
    pub k_hi: u64,
    pub points: usize,
    pub replications: usize,
    /// Root-mean-square residual in log space.
    pub rms_residual: f64,
    /// Set when the window had to shrink.
    pub notice: Option<String>,
}

/// Averages equally sampled series pointwise.
pub fn pointwise_mean(series: &[Vec<(u64, f64)>]) -> Result<Vec<(u64, f64)>> {
    let first = series.first().ok_or_else(|| Error::InvalidInput("no trajectories".into()))?;
    for s in series {
        if s.len() != first.len() || s.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            return Err(Error::InvalidInput("trajectories are not sampled at the same rounds".into()));
        }
    }
    let r = series.len() as f64;
    Ok((0..first.len())
        .map(|i| (first[i].0, series.iter().map(|s| s[i].1).sum::<f64>() / r))
        .collect())
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (x - mx), b + (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (rss / m).sqrt())
}

/// Fits the decay rate of the pointwise mean of `series` over `[k_lo, k_hi]`.
///
/// If the mean drops to zero or below inside the window, the window ends just
/// before the first such point and `notice` says so.
pub fn fit_rate(series: &[Vec<(u64, f64)>], window: (u64, u64)) -> Result<RateFit> {
    let (k_lo, k_hi) = window;
    if k_lo == 0 || k_lo >= k_hi {
        return Err(Error::InvalidParameter(format!("bad fit window [{k_lo}, {k_hi}]")));
    }
    let mean = pointwise_mean(series)?;
    let horizon = mean.last().map_or(0, |p| p.0);
    if k_hi > horizon {
        return Err(Error::InvalidParameter(format!("fit window ends at {k_hi}, beyond the last round {horizon}")));
    }
    let mut pts: Vec<(u64, f64)> = mean.into_iter().filter(|(k, _)| *k >= k_lo && *k <= k_hi).collect();
    let mut notice = None;
    if let Some(bad) = pts.iter().position(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        let at = pts[bad].0;
        pts.truncate(bad);
        notice = Some(format!("non-positive or non-finite mean at k = {at}; window shrunk to end before it"));
    }
    if pts.len() < 5 {
        return Err(Error::InvalidInput(format!("only {} usable points in the fit window (need 5)", pts.len())));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(k, v)| ((*k as f64).ln(), v.ln())).collect();
    let (slope, intercept, rms_residual) = least_squares(&logs);
    Ok(RateFit {
        slope,
        intercept,
        k_lo: pts[0].0,
        k_hi: pts[pts.len() - 1].0,
        points: pts.len(),
        replications: series.len(),
        rms_residual,
        notice,
    })
}

/// `(k, field)` pairs from a summary trajectory.
pub fn field_series(summaries: &[IterateSummary], field: &str) -> Result<Vec<(u64, f64)>> {
    if !IterateSummary::FIELDS.contains(&field) {
        return Err(Error::InvalidParameter(format!("unknown field `{field}`")));
    }
    Ok(summaries.iter().map(|s| (s.k, s.field(field).unwrap_or(f64::NAN))).collect())
}

/// Mean of the `window` values ending at index `end` (inclusive), or fewer
/// when the series is shorter.
pub fn trailing_mean(values: &[f64], end: usize, window: usize) -> f64 {
    let start = (end + 1).saturating_sub(window.max(1));
    let slice = &values[start..=end];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Trailing moving average of every prefix.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len()).map(|i| trailing_mean(values, i, window)).collect()
}

/// `beta_k = a / (k^exp + b)`; `exp = 0` gives a constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaSchedule {
    pub a: f64,
    pub b: f64,
    pub exp: f64,
}

impl BetaSchedule {
    pub fn at(&self, k: u64) -> f64 {
        (self.a / ((k.max(1) as f64).powf(self.exp) + self.b)).min(1.0)
    }

    /// One of the two families for which the estimation error is `O(beta_k)`.
    pub fn is_admissible(&self) -> bool {
        let base = self.a > 0.0 && self.b >= 0.0;
        let power = self.exp > 0.5 && self.exp < 1.0;
        let harmonic = self.exp == 1.0 && self.a > 1.0 && self.a < self.b + 1.0;
        base && (power || harmonic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub checkpoints: Vec<u64>,
    /// Mean over replications of `||e_{k+1}||^2 / beta_k`.
    pub mean_ratio: Vec<f64>,
    pub median_ratio: Vec<f64>,
    pub replications: usize,
    pub warning: Option<String>,
}

impl DecayReport {
    pub fn median_at(&self, k: u64) -> Option<f64> {
        self.checkpoints.iter().position(|&c| c == k).map(|i| self.median_ratio[i])
    }
}

/// Powers of ten up to `horizon`, plus `horizon` itself.
pub fn log_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut c = 1u64;
    while c <= horizon {
        out.push(c);
        c = c.saturating_mul(10);
    }
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Runs the bare VRA recursion on a frozen `d`-dimensional signal, starting
/// from exact estimates, and reports `||e||^2 / beta_k` at the checkpoints. Replication `r` uses the
/// streams of seed `seed + r`.
pub fn vra_decay_probe(
    w: &WeightMatrix,
    channel: &ChannelSpec,
    schedule: BetaSchedule,
    horizon: u64,
    reps: usize,
    d: usize,
    checkpoints: &[u64],
    seed: u64,
) -> Result<DecayReport> {
    if reps == 0 || horizon == 0 || d == 0 {
        return Err(Error::InvalidParameter("probe needs reps, horizon and dimension >= 1".into()));
    }
    if let Some(&c) = checkpoints.iter().find(|&&c| c == 0 || c > horizon) {
        return Err(Error::InvalidParameter(format!("checkpoint {c} outside 1..={horizon}")));
    }
    channel.validate()?;
    let n = w.n();
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            use rand::Rng;
            let streams = Streams::replication(seed, r as u64);
            let mut sig = streams.stream(Purpose::Instance, 0, 0, 0);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| sig.random_range(-1.0..1.0)).collect()).collect();
            let v = Stack::from_rows(&rows);
            let mut z = neighbor_sum(w, &v);
            let mut out = Vec::with_capacity(checkpoints.len());
            for k in 1..=horizon {
                let beta = schedule.at(k);
                let noise = RoundNoise { streams: &streams, purpose: Purpose::NoiseX, round: k };
                let round = vra_round(&v, &v, &z, w, beta, channel, noise, DEFAULT_PAYLOAD_GUARD)?;
                z = round.z;
                if checkpoints.contains(&k) {
                    out.push(round.error.norm_sq() / beta);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut mean_ratio = Vec::with_capacity(checkpoints.len());
    let mut median_ratio = Vec::with_capacity(checkpoints.len());
    for i in 0..checkpoints.len() {
        let mut col: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
        mean_ratio.push(col.iter().sum::<f64>() / reps as f64);
        median_ratio.push(median(&mut col));
    }
    let warning = (!schedule.is_admissible()).then(|| {
        format!(
            "beta_k = {}/(k^{} + {}) is outside the admissible families; the O(beta_k) bound is not guaranteed",
            schedule.a, schedule.exp, schedule.b
        )
    });
    Ok(DecayReport { checkpoints: checkpoints.to_vec(), mean_ratio, median_ratio, replications: reps, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::ScheduleValues;
    use crate::graph::Topology;

    fn record(x: Stack, y: Stack) -> StepRecord {
        let (n, d) = (x.n(), x.d());
        StepRecord {
            k: 1,
            values: ScheduleValues { alpha: 0.1, beta: 0.2, gamma: 0.9, gamma_k: 0.5, lambda: 0.5 },
            x,
            y,
            g: Stack::zeros(n, d),
            ex: Stack::zeros(n, d),
            es: Stack::zeros(n, d),
            eq: None,
            residual_x: 0.0,
            residual_s: 0.0,
            max_payload: 0.0,
        }
    }

    #[test]
    fn two_agent_hand_instance() {
        let rec = record(Stack::from_rows(&[vec![0.0], vec![2.0]]), Stack::zeros(2, 1));
        let s = summarize(&rec, Some(&[0.0]), None).unwrap();
        assert_eq!((s.agree, s.opt_gap, s.norm_gap, s.track), (2.0, 1.0, 1.0, 0.0));
        assert_eq!(s.lyap, 3.0);
    }

    #[test]
    fn consensus_at_optimum_is_zero() {
        let xs = [1.5, -2.0];
        let rec = record(Stack::broadcast(4, &xs), Stack::broadcast(4, &[0.3, 0.7]));
        let s = summarize(&rec, Some(&xs), Some(5.0)).unwrap();
        assert_eq!((s.agree, s.track, s.opt_gap, s.lyap), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn missing_reference_is_invalid_state() {
        let rec = record(Stack::zeros(2, 1), Stack::zeros(2, 1));
        assert!(matches!(summarize(&rec, None, None), Err(Error::InvalidState(_))));
    }

    #[test]
    fn fit_recovers_power_laws() {
        let ks: Vec<u64> = (1..=100).map(|i| i * 100).collect();
        let s1: Vec<_> = ks.iter().map(|&k| (k, 7.0 / k as f64)).collect();
        let f = fit_rate(&[s1], (1000, 10_000)).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-6);
        let s2: Vec<_> = ks.iter().map(|&k| (k, 3.0 / (k as f64).powf(0.8))).collect();
        let f = fit_rate(&[s2.clone(), s2], (1000, 10_000)).unwrap();
        assert!((f.slope + 0.8).abs() < 1e-6);
        assert_eq!(f.replications, 2);
    }

    #[test]
    fn fit_shrinks_on_zeros() {
        let s: Vec<_> = (1..=100u64).map(|k| (k, if k > 60 { 0.0 } else { 1.0 / k as f64 })).collect();
        let f = fit_rate(&[s], (10, 100)).unwrap();
        assert_eq!(f.k_hi, 60);
        assert!(f.notice.is_some());
        assert!((f.slope + 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_window_checks() {
        let s: Vec<_> = (1..=10u64).map(|k| (k, 1.0 / k as f64)).collect();
        assert!(fit_rate(&[s.clone()], (1, 20)).is_err());
        assert!(fit_rate(&[s.clone()], (8, 10)).is_err());
        assert!(fit_rate(&[], (1, 10)).is_err());
    }

    #[test]
    fn moving_average_values() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn probe_exact_channel_gives_zero_ratios() {
        let w = WeightMatrix::metropolis(&Topology::cycle(4).unwrap());
        let sched = BetaSchedule { a: 2.0, b: 2.0, exp: 1.0 };
        let r = vra_decay_probe(&w, &ChannelSpec::Exact, sched, 100, 3, 2, &[10, 100], 1).unwrap();
        assert!(r.mean_ratio.iter().all(|&v| v < 1e-20), "{:?}", r.mean_ratio);
        assert!(r.warning.is_none());
    }

    #[test]
    fn probe_beta_one_matches_closed_form() {
        // e_{k+1} = (W - diag W) zeta_k, so E||e||^2 = sigma2 d ||W - diag W||_F^2
        let w = WeightMatrix::metropolis(&Topology::cycle(4).unwrap());
        let sched = BetaSchedule { a: 1.0, b: 0.0, exp: 0.0 };
        let (sigma2, d) = (2.0, 3);
        let r = vra_decay_probe(&w, &ChannelSpec::Gaussian { sigma2 }, sched, 50, 400, d, &[1, 50], 2).unwrap();
        let fro2: f64 = w.off_diagonal().iter().map(|v| v * v).sum();
        let expect = sigma2 * d as f64 * fro2;
        for m in &r.mean_ratio {
            assert!((m - expect).abs() < 0.1 * expect, "{m} vs {expect}");
        }
        assert!(r.warning.is_some());
    }

    #[test]
    fn admissible_families() {
        assert!(BetaSchedule { a: 2.0, b: 2.0, exp: 1.0 }.is_admissible());
        assert!(!BetaSchedule { a: 1.0, b: 2.0, exp: 1.0 }.is_admissible());
        assert!(BetaSchedule { a: 0.3, b: 0.0, exp: 0.7 }.is_admissible());
        assert_eq!(log_checkpoints(2500), vec![1, 10, 100, 1000, 2500]);
    }
}
