//! Variance-reduced aggregation: each agent sends the encoded increment
//! `(v_new - (1-beta) v_old) / beta`, every receiver gets its own noisy copy,
//! and keeps `z <- beta * sum_j w_ij m_j + (1-beta) z`.

use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::rng::{Purpose, Streams};
use crate::stack::Stack;

/// Default bound on encoded payload magnitudes.
pub const DEFAULT_PAYLOAD_GUARD: f64 = 1e12;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
    }
    Ok(())
}

/// `(v_new - (1-beta) v_old) / beta`.
pub fn vra_encode(v_new: &[f64], v_old: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v_new.len()];
    vra_encode_into(v_new, v_old, beta, &mut out)?;
    Ok(out)
}

pub fn vra_encode_into(v_new: &[f64], v_old: &[f64], beta: f64, out: &mut [f64]) -> Result<()> {
    check_beta(beta)?;
    if v_new.len() != v_old.len() || out.len() != v_new.len() {
        return Err(Error::InvalidInput("encode dimension mismatch".into()));
    }
    let keep = 1.0 - beta;
    for ((o, a), b) in out.iter_mut().zip(v_new).zip(v_old) {
        *o = (a - keep * b) / beta;
    }
    Ok(())
}

/// Updates one agent's estimate from its neighbors' received messages.
///
/// `weights` lists `(j, w_ij)` for every neighbor; `received` must hold
/// exactly one message per listed neighbor.
pub fn vra_aggregate(z: &mut [f64], received: &[(usize, &[f64])], weights: &[(usize, f64)], beta: f64) -> Result<()> {
    check_beta(beta)?;
    if received.len() != weights.len() {
        return Err(Error::Protocol(format!(
            "expected {} neighbor messages, got {}",
            weights.len(),
            received.len()
        )));
    }
    let mut acc = vec![0.0; z.len()];
    for &(j, w) in weights {
        let msg = received
            .iter()
            .find(|(src, _)| *src == j)
            .map(|(_, m)| *m)
            .ok_or_else(|| Error::Protocol(format!("no message from neighbor {j}")))?;
        if msg.len() != z.len() {
            return Err(Error::Protocol(format!("message from {j} has dimension {}", msg.len())));
        }
        acc.iter_mut().zip(msg).for_each(|(a, m)| *a += w * m);
    }
    let keep = 1.0 - beta;
    for (zi, a) in z.iter_mut().zip(&acc) {
        *zi = beta * a + keep * *zi;
    }
    Ok(())
}

/// `(W - diag W) V`: the quantity each estimator tracks.
pub fn neighbor_sum(w: &WeightMatrix, v: &Stack) -> Stack {
    let mut out = Stack::zeros(v.n(), v.d());
    for i in 0..v.n() {
        let row = out.row_mut(i);
        for &j in w.neighbors(i) {
            let wij = w.get(i, j);
            row.iter_mut().zip(v.row(j)).for_each(|(o, x)| *o += wij * x);
        }
    }
    out
}

/// `z - (W - diag W) V`.
pub fn vra_error(z: &Stack, w: &WeightMatrix, v: &Stack) -> Stack {
    z.sub(&neighbor_sum(w, v))
}

/// Where one round's randomness comes from.
#[derive(Clone, Copy, Debug)]
pub struct RoundNoise<'a> {
    pub streams: &'a Streams,
    pub purpose: Purpose,
    pub round: u64,
}

/// Outputs of one synchronous VRA round.
#[derive(Clone, Debug)]
pub struct VraRound {
    pub z: Stack,
    /// Row `i` is `sum_{j in N_i} w_ij zeta_{j->i}`, i.e. `(W - diag W) zeta`.
    pub weighted_noise: Stack,
    /// `z' - (W - diag W) V_new`.
    pub error: Stack,
    /// Largest absolute encoded coordinate.
    pub max_payload: f64,
}

impl VraRound {
    /// `e' - [(1-beta) e + beta (W - diag W) zeta]` in max norm.
    pub fn recursion_residual(&self, prev_error: &Stack, beta: f64) -> f64 {
        let keep = 1.0 - beta;
        self.error
            .as_slice()
            .iter()
            .zip(prev_error.as_slice())
            .zip(self.weighted_noise.as_slice())
            .map(|((e, p), z)| (e - (keep * p + beta * z)).abs())
            .fold(0.0, f64::max)
    }
}

/// One VRA round for all agents. Agent `j`'s message to `i` passes through
/// the channel on the substream `(purpose, round, j, i)`.
#[allow(clippy::too_many_arguments)]
pub fn vra_round(
    v_new: &Stack,
    v_old: &Stack,
    z: &Stack,
    w: &WeightMatrix,
    beta: f64,
    channel: &ChannelSpec,
    noise: RoundNoise<'_>,
    guard: f64,
) -> Result<VraRound> {
    check_beta(beta)?;
    let (n, d) = (v_new.n(), v_new.d());
    if v_old.n() != n || v_old.d() != d || z.n() != n || z.d() != d || w.n() != n {
        return Err(Error::InvalidInput("VRA round shape mismatch".into()));
    }
    let mut msgs = Stack::zeros(n, d);
    let mut max_payload = 0.0f64;
    for j in 0..n {
        vra_encode_into(v_new.row(j), v_old.row(j), beta, msgs.row_mut(j))?;
        let m = msgs.row(j).iter().fold(0.0f64, |a, v| if v.is_nan() { f64::NAN } else { a.max(v.abs()) });
        if !m.is_finite() {
            return Err(Error::NonFinite { what: "VRA payload", agent: j });
        }
        if m > guard {
            return Err(Error::PayloadOverflow { agent: j, magnitude: m, guard });
        }
        max_payload = max_payload.max(m);
    }

    let keep = 1.0 - beta;
    let mut z_new = Stack::zeros(n, d);
    let mut weighted_noise = Stack::zeros(n, d);
    let mut buf = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for i in 0..n {
        acc.fill(0.0);
        let wn = weighted_noise.row_mut(i);
        for &j in w.neighbors(i) {
            let wij = w.get(i, j);
            let m = msgs.row(j);
            if channel.is_exact() {
                acc.iter_mut().zip(m).for_each(|(a, x)| *a += wij * x);
                continue;
            }
            let mut rng = noise.streams.stream(noise.purpose, noise.round, j as u64, i as u64);
            channel.transmit_into(m, &mut buf, &mut rng)?;
            for ((a, r), (nz, x)) in acc.iter_mut().zip(&buf).zip(wn.iter_mut().zip(m)) {
                *a += wij * r;
                *nz += wij * (r - x);
            }
        }
        for ((zn, a), zo) in z_new.row_mut(i).iter_mut().zip(&acc).zip(z.row(i)) {
            *zn = beta * a + keep * zo;
        }
    }
    if let Some(i) = z_new.first_non_finite_row() {
        return Err(Error::NonFinite { what: "VRA estimate", agent: i });
    }
    let error = vra_error(&z_new, w, v_new);
    Ok(VraRound { z: z_new, weighted_noise, error, max_payload })
}
