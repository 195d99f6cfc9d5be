//! Seedable generation of Gaussian, compound-Poisson and α-stable increments.
//!
//! Every random draw in the crate goes through a [`NoiseStream`] opened from a
//! [`StreamId`]. The stream is a ChaCha8 generator whose key is built from the
//! `(seed, path_index)` pair and whose stream number is the `channel`, so two
//! distinct identities never share a key/stream pair and the sequence for a
//! given identity does not depend on which thread opens it or when.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Jump-size distribution for the Poisson random measure.
///
/// Jumps act additively on the state they hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Centered normal with standard deviation `scale`.
    Gaussian { scale: f64 },
    /// Every jump has size `value`.
    PointMass { value: f64 },
}

impl Default for JumpLaw {
    fn default() -> Self {
        JumpLaw::Gaussian { scale: 0.1 }
    }
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpLaw::Gaussian { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                Err(Error::invalid(format!(
                    "jump_law.scale must be finite and >= 0, got {scale}"
                )))
            }
            JumpLaw::PointMass { value } if !value.is_finite() => Err(Error::invalid(format!(
                "jump_law.value must be finite, got {value}"
            ))),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Gaussian { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            }
            JumpLaw::PointMass { value } => value,
        }
    }
}

/// Noise scales and laws shared by all channels of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gaussian diffusion scale, per square-root time.
    pub sigma: f64,
    /// Jump intensity, events per unit time.
    pub lambda: f64,
    pub jump_law: JumpLaw,
    /// Stability index of the α-stable driver, in (0, 2].
    pub alpha_stable: f64,
    /// Skewness of the α-stable driver, in [-1, 1].
    pub skew: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma: 0.1,
            lambda: 0.01,
            jump_law: JumpLaw::default(),
            alpha_stable: 2.0,
            skew: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "noise.sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "noise.lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        check_alpha(self.alpha_stable)?;
        check_skew(self.skew)?;
        self.jump_law.validate()
    }
}

/// Identity of one random stream: a seed, the Monte Carlo path it belongs to
/// and the noise channel within that path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub path_index: u64,
    pub channel: u64,
}

impl StreamId {
    pub fn new(seed: u64, path_index: u64, channel: u64) -> Self {
        StreamId {
            seed,
            path_index,
            channel,
        }
    }

    pub fn with_channel(self, channel: u64) -> Self {
        StreamId { channel, ..self }
    }

    pub fn with_path(self, path_index: u64) -> Self {
        StreamId { path_index, ..self }
    }

    pub fn open(self) -> NoiseStream {
        NoiseStream::new(self)
    }
}

/// A positioned random stream. Cheap to create; not meant to be shared
/// between threads while in use.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    id: StreamId,
    rng: ChaCha8Rng,
}

// Fixed tail of the ChaCha key; the first 16 bytes carry seed and path index.
const KEY_TAG: [u8; 16] = *b"levy-solow/noise";

impl NoiseStream {
    pub fn new(id: StreamId) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&id.seed.to_le_bytes());
        key[8..16].copy_from_slice(&id.path_index.to_le_bytes());
        key[16..].copy_from_slice(&KEY_TAG);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(id.channel);
        NoiseStream { id, rng }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// `√dt · Z` with `Z` standard normal.
    pub fn gaussian_increment(&mut self, dt: f64) -> Result<f64> {
        check_dt(dt)?;
        Ok(dt.sqrt() * self.standard_normal())
    }

    /// Increment over `dt` of a unit-scale α-stable Lévy motion.
    ///
    /// For `alpha != 1` this is `dt^(1/alpha) · S`; for `alpha == 1` the
    /// non-strictly-stable drift `(2/π)·skew·dt·ln dt` is added, which
    /// vanishes in the symmetric case.
    pub fn stable_increment(&mut self, alpha: f64, skew: f64, dt: f64) -> Result<f64> {
        check_alpha(alpha)?;
        check_skew(skew)?;
        check_dt(dt)?;
        let s = self.standard_stable(alpha, skew);
        if alpha == 1.0 {
            Ok(dt * s + 2.0 / PI * skew * dt * dt.ln())
        } else {
            Ok(dt.powf(1.0 / alpha) * s)
        }
    }

    /// Standard α-stable variate (unit scale, zero location) by the
    /// Chambers–Mallows–Stuck construction.
    pub fn standard_stable(&mut self, alpha: f64, skew: f64) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        let w: f64 = Exp1.sample(&mut self.rng);
        chambers_mallows_stuck(alpha, skew, PI * (u - 0.5), w)
    }

    /// Number of Poisson events with mean `lambda · dt`.
    pub fn jump_count(&mut self, lambda: f64, dt: f64) -> Result<u64> {
        check_dt(dt)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "jump intensity must be >= 0, got {lambda}"
            )));
        }
        let mean = lambda * dt;
        if mean == 0.0 {
            return Ok(0);
        }
        let dist =
            Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
        Ok(dist.sample(&mut self.rng) as u64)
    }

    /// Jump sizes of the uncompensated compound-Poisson measure over one
    /// step: the count is Poisson(`lambda · dt`), sizes are i.i.d. from `law`.
    pub fn jump_batch(&mut self, lambda: f64, dt: f64, law: &JumpLaw) -> Result<Vec<f64>> {
        law.validate()?;
        let n = self.jump_count(lambda, dt)?;
        Ok((0..n).map(|_| law.sample(&mut self.rng)).collect())
    }
}

/// CMS transform of `v ~ U(-π/2, π/2)` and `w ~ Exp(1)` into a standard
/// stable variate with characteristic function
/// `exp(-|t|^α (1 - iβ sign(t) tan(πα/2)))` (α ≠ 1).
pub fn chambers_mallows_stuck(alpha: f64, skew: f64, v: f64, w: f64) -> f64 {
    if alpha == 1.0 {
        let shifted = FRAC_PI_2 + skew * v;
        return (2.0 / PI)
            * (shifted * v.tan() - skew * ((FRAC_PI_2 * w * v.cos()) / shifted).ln());
    }
    let t = (PI * alpha / 2.0).tan();
    let b = (skew * t).atan() / alpha;
    let s = (1.0 + skew * skew * t * t).powf(1.0 / (2.0 * alpha));
    let av = alpha * (v + b);
    s * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time step must be > 0, got {dt}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "stability index must lie in (0, 2], got {alpha}"
        )))
    }
}

fn check_skew(skew: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&skew) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "stable skewness must lie in [-1, 1], got {skew}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(seed: u64) -> NoiseStream {
        StreamId::new(seed, 0, 0).open()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn gaussian_variance_matches_dt() {
        let mut s = stream(1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| s.gaussian_increment(0.01).unwrap())
            .collect();
        let (_, v) = mean_var(&xs);
        // standard error of a normal sample variance: v·sqrt(2/(n-1))
        let se = 0.01 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((v - 0.01).abs() < 3.0 * se, "variance {v}");
    }

    #[test]
    fn gaussian_mean_is_zero() {
        let mut s = stream(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| s.gaussian_increment(1.0).unwrap()).collect();
        let (m, _) = mean_var(&xs);
        assert!(m.abs() < 3.0 / (n as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn identical_stream_ids_repeat() {
        let a: Vec<f64> = {
            let mut s = StreamId::new(42, 0, 0).open();
            (0..1000)
                .map(|_| s.gaussian_increment(0.5).unwrap())
                .collect()
        };
        let b: Vec<f64> = {
            let mut s = StreamId::new(42, 0, 0).open();
            (0..1000)
                .map(|_| s.gaussian_increment(0.5).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut s = stream(3);
        assert!(s.gaussian_increment(0.0).is_err());
        assert!(s.gaussian_increment(-1.0).is_err());
        assert!(s.stable_increment(0.0, 0.0, 1.0).is_err());
        assert!(s.stable_increment(2.5, 0.0, 1.0).is_err());
        assert!(s.stable_increment(1.5, 1.5, 1.0).is_err());
        assert!(s.jump_batch(-1.0, 1.0, &JumpLaw::default()).is_err());
    }

    #[test]
    fn zero_intensity_never_jumps() {
        let mut s = stream(4);
        for _ in 0..10_000 {
            assert!(s
                .jump_batch(0.0, 1.0, &JumpLaw::default())
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn rare_jump_rate_matches_poisson_mean() {
        let mut s = stream(5);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| s.jump_count(0.01, 0.01).unwrap()).sum();
        let mean = 1e-4;
        let se = (mean / n as f64).sqrt();
        let got = total as f64 / n as f64;
        assert!((got - mean).abs() < 3.0 * se, "mean count {got}");
    }

    #[test]
    fn unit_point_mass_sums_to_count() {
        let mut s = stream(6);
        let jumps = s
            .jump_batch(100.0, 1.0, &JumpLaw::PointMass { value: 1.0 })
            .unwrap();
        let sum: f64 = jumps.iter().sum();
        assert_eq!(sum, jumps.len() as f64);
        assert!((sum - 100.0).abs() <= 30.0, "sum {sum}");
    }

    #[test]
    fn cms_alpha_two_is_gaussian_with_variance_two() {
        let mut s = stream(7);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| s.stable_increment(2.0, 0.0, 1.0).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let se = 2.0 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((v - 2.0).abs() < 3.0 * se, "variance {v}");
        assert!(m.abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn cms_alpha_two_closed_form() {
        // α = 2 collapses to 2·sin(v)·sqrt(w)
        for &(v, w) in &[(0.3, 0.7), (-1.2, 2.5), (1.5, 0.01)] {
            let x = chambers_mallows_stuck(2.0, 0.0, v, w);
            let expected = 2.0 * f64::sin(v) * w.sqrt();
            assert!((x - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn cms_alpha_one_symmetric_is_tangent() {
        for &(v, w) in &[(0.3, 0.7), (-1.2, 2.5)] {
            let x = chambers_mallows_stuck(1.0, 0.0, v, w);
            assert!((x - f64::tan(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_stable_is_finite() {
        let mut s = stream(8);
        for &alpha in &[0.33, 0.8, 1.0, 1.2, 1.5, 1.99] {
            for &skew in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
                for _ in 0..200 {
                    let x = s.stable_increment(alpha, skew, 0.01).unwrap();
                    assert!(x.is_finite(), "alpha {alpha} skew {skew}");
                }
            }
        }
    }
}
