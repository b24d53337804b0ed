//! Inexact communication models applied to every transmitted message.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "kebab-case")]
pub enum ChannelSpec {
    Exact,
    /// Additive `N(0, sigma2)` noise on every coordinate.
    Gaussian { sigma2: f64 },
    /// Unbiased randomized rounding to the grid `Z / delta`.
    Quantizer { delta: f64 },
}

impl ChannelSpec {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        let c = ChannelSpec::Gaussian { sigma2 };
        c.validate()?;
        Ok(c)
    }

    pub fn quantizer(delta: f64) -> Result<Self> {
        let c = ChannelSpec::Quantizer { delta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelSpec::Exact => Ok(()),
            ChannelSpec::Gaussian { sigma2 } if sigma2.is_finite() && sigma2 >= 0.0 => Ok(()),
            ChannelSpec::Gaussian { sigma2 } => {
                Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {sigma2}")))
            }
            ChannelSpec::Quantizer { delta } if delta.is_finite() && delta > 0.0 => Ok(()),
            ChannelSpec::Quantizer { delta } => {
                Err(Error::InvalidParameter(format!("quantizer density must be > 0, got {delta}")))
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ChannelSpec::Exact)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelSpec::Exact => "exact",
            ChannelSpec::Gaussian { .. } => "gaussian",
            ChannelSpec::Quantizer { .. } => "quantizer",
        }
    }

    /// Upper bound on `E||received - sent||^2` for a `d`-dimensional message.
    pub fn variance_bound(&self, d: usize) -> f64 {
        match *self {
            ChannelSpec::Exact => 0.0,
            ChannelSpec::Gaussian { sigma2 } => d as f64 * sigma2,
            ChannelSpec::Quantizer { delta } => d as f64 / (4.0 * delta * delta),
        }
    }

    /// Writes the received copy of `msg` into `out`.
    ///
    /// Fails on non-finite input instead of letting NaN travel through the
    /// estimators.
    pub fn transmit_into<R: Rng + ?Sized>(&self, msg: &[f64], out: &mut [f64], rng: &mut R) -> Result<()> {
        debug_assert_eq!(msg.len(), out.len());
        if let Some(pos) = msg.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite message coordinate {pos}")));
        }
        match *self {
            ChannelSpec::Exact => out.copy_from_slice(msg),
            ChannelSpec::Gaussian { sigma2 } => {
                if sigma2 == 0.0 {
                    out.copy_from_slice(msg);
                } else {
                    let sd = sigma2.sqrt();
                    for (o, &m) in out.iter_mut().zip(msg) {
                        let z: f64 = rng.sample(StandardNormal);
                        *o = m + sd * z;
                    }
                }
            }
            ChannelSpec::Quantizer { delta } => {
                for (o, &m) in out.iter_mut().zip(msg) {
                    *o = quantize_prob(m, delta, rng);
                }
            }
        }
        Ok(())
    }

    pub fn transmit<R: Rng + ?Sized>(&self, msg: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; msg.len()];
        self.transmit_into(msg, &mut out, rng)?;
        Ok(out)
    }
}

/// Same as [`ChannelSpec::variance_bound`].
pub fn channel_variance_bound(c: &ChannelSpec, d: usize) -> f64 {
    c.variance_bound(d)
}

/// Randomized rounding of `theta` to a neighbouring multiple of `1/delta`.
///
/// Returns the lower grid point with probability `(ceil - theta) * delta`
/// and the upper one otherwise; on-grid inputs come back unchanged.
pub fn quantize_prob<R: Rng + ?Sized>(theta: f64, delta: f64, rng: &mut R) -> f64 {
    let scaled = theta * delta;
    let lo = scaled.floor();
    let p_up = scaled - lo;
    if p_up == 0.0 {
        return lo / delta;
    }
    let u: f64 = rng.random();
    if u < p_up {
        (lo + 1.0) / delta
    } else {
        lo / delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, Streams};

    fn rng(seed: u64) -> crate::rng::CounterRng {
        Streams::new(seed).stream(Purpose::Aux, 0, 0, 0)
    }

    #[test]
    fn exact_and_zero_noise_are_identity() {
        let m = [1.5, -2.25, 1e9];
        let mut r = rng(1);
        assert_eq!(ChannelSpec::Exact.transmit(&m, &mut r).unwrap(), m);
        assert_eq!(ChannelSpec::gaussian(0.0).unwrap().transmit(&m, &mut r).unwrap(), m);
    }

    #[test]
    fn on_grid_values_are_fixed_points() {
        let mut r = rng(2);
        for _ in 0..100 {
            assert_eq!(quantize_prob(2.0, 1.0, &mut r), 2.0);
            assert_eq!(quantize_prob(-0.5, 2.0, &mut r), -0.5);
        }
    }

    #[test]
    fn quarter_rounds_up_a_quarter_of_the_time() {
        let mut r = rng(3);
        let n = 400_000;
        let mut ups = 0;
        for _ in 0..n {
            let q = quantize_prob(0.25, 1.0, &mut r);
            assert!(q == 0.0 || q == 1.0);
            ups += (q == 1.0) as usize;
        }
        let frac = ups as f64 / n as f64;
        // binomial sd = sqrt(0.25 * 0.75 / n) ~ 6.8e-4
        assert!((frac - 0.25).abs() < 4.0 * 6.9e-4, "{frac}");
    }

    #[test]
    fn decimal_grid_law() {
        let mut r = rng(4);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut ups = 0usize;
        for _ in 0..n {
            let q = quantize_prob(0.33, 10.0, &mut r);
            assert!(q == 0.3 || q == 0.4, "{q}");
            ups += (q == 0.4) as usize;
            sum += q;
        }
        assert!((sum / n as f64 - 0.33).abs() < 1e-3);
        assert!((ups as f64 / n as f64 - 0.3).abs() < 2e-3);
    }

    #[test]
    fn half_point_mean() {
        let c = ChannelSpec::quantizer(1.0).unwrap();
        let mut r = rng(5);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += c.transmit(&[0.5], &mut r).unwrap()[0];
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn rejects_non_finite() {
        let mut r = rng(6);
        let err = ChannelSpec::Exact.transmit(&[0.0, f64::NAN], &mut r).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn variance_bounds() {
        assert_eq!(channel_variance_bound(&ChannelSpec::Gaussian { sigma2: 1.0 }, 114), 114.0);
        assert!((channel_variance_bound(&ChannelSpec::Quantizer { delta: 10.0 }, 4) - 0.01).abs() < 1e-15);
        assert_eq!(channel_variance_bound(&ChannelSpec::Exact, 50), 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(ChannelSpec::gaussian(-1.0).is_err());
        assert!(ChannelSpec::quantizer(0.0).is_err());
        assert!(ChannelSpec::quantizer(f64::INFINITY).is_err());
    }
}
