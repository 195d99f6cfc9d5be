//! Largest Lyapunov exponent by the two-trajectory (Benettin) method.
//!
//! A companion trajectory starts `delta0` away from the base trajectory and
//! is driven by the same noise realization. Every `renorm_interval` steps the
//! separation is measured, its log-stretch accumulated, and the companion
//! pulled back to distance `delta0` along the current separation direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{ModelParams, StateVec, Variant};
use crate::noise::StreamId;
use crate::sde::{advance, draw_step_noise, ChannelStreams, IntegratorConfig};
use crate::stats::mean_with_half_width;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovOptions {
    pub renorm_interval: usize,
    pub delta0: f64,
    /// Number of batches used for the confidence half-width.
    pub batches: usize,
    /// Clamp events above this fraction of steps flag the estimate.
    pub max_clamp_fraction: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            renorm_interval: 10,
            delta0: 1e-8,
            batches: 10,
            max_clamp_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    /// 95% half-width from batch means.
    pub half_width: f64,
    pub clamp_fraction: f64,
    /// Renormalizations where the separation collapsed to zero or overflowed.
    pub degenerate: usize,
    pub unreliable: bool,
}

pub fn lyapunov_largest(
    variant: Variant,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
    init: &StateVec,
    stream: StreamId,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    mp.validate()?;
    cfg.validate()?;
    if init.variant() != variant {
        return Err(Error::invalid("initial state does not match the variant"));
    }
    if opts.renorm_interval == 0 || !(opts.delta0 > 0.0) {
        return Err(Error::invalid(
            "renorm_interval and delta0 must be positive",
        ));
    }
    let n_steps = cfg.n_steps();
    let intervals = n_steps / opts.renorm_interval;
    if intervals == 0 {
        return Err(Error::invalid(
            "horizon shorter than one renormalization interval",
        ));
    }

    let dim = variant.dim();
    let mut base = *init;
    let mut comp = *init;
    let offset = opts.delta0 / (dim as f64).sqrt();
    comp.as_mut_slice().iter_mut().for_each(|x| *x += offset);

    let mut streams = ChannelStreams::open(variant, mp, stream);
    let mut stretches = Vec::with_capacity(intervals);
    let mut clamps = 0usize;
    let mut degenerate = 0usize;
    let mut step = 0usize;
    for _ in 0..intervals {
        for _ in 0..opts.renorm_interval {
            let noise = draw_step_noise(&mut streams, mp, cfg)?;
            let (b, cb) = advance(&base, mp, cfg, &noise, step)?;
            let (c, cc) = advance(&comp, mp, cfg, &noise, step)?;
            clamps += usize::from(cb || cc);
            base = b;
            comp = c;
            step += 1;
        }
        let diff: Vec<f64> = comp
            .as_slice()
            .iter()
            .zip(base.as_slice())
            .map(|(c, b)| c - b)
            .collect();
        let dist = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        if dist > 0.0 && dist.is_finite() {
            stretches.push((dist / opts.delta0).ln());
            let scale = opts.delta0 / dist;
            for (x, (b, d)) in comp
                .as_mut_slice()
                .iter_mut()
                .zip(base.as_slice().iter().zip(&diff))
            {
                *x = b + d * scale;
            }
        } else {
            degenerate += 1;
            comp = base;
            comp.as_mut_slice().iter_mut().for_each(|x| *x += offset);
        }
    }

    let tau = opts.renorm_interval as f64 * cfg.dt;
    if stretches.is_empty() {
        return Err(Error::invalid(
            "separation collapsed in every renormalization interval",
        ));
    }
    let exponent = stretches.iter().sum::<f64>() / (stretches.len() as f64 * tau);
    let nb = opts.batches.clamp(2, stretches.len().max(2));
    let per = stretches.len() / nb;
    let half_width = if per == 0 {
        f64::NAN
    } else {
        let rates: Vec<f64> = stretches
            .chunks(per)
            .take(nb)
            .map(|c| c.iter().sum::<f64>() / (c.len() as f64 * tau))
            .collect();
        mean_with_half_width(&rates).1
    };
    let clamp_fraction = clamps as f64 / n_steps as f64;
    Ok(LyapunovEstimate {
        exponent,
        half_width,
        clamp_fraction,
        degenerate,
        unreliable: clamp_fraction > opts.max_clamp_fraction || degenerate > 0,
    })
}

/// Seed-ensemble estimate at one noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub mean: f64,
    pub half_width: f64,
    pub n_seeds: usize,
    pub unreliable: usize,
}

/// Ensemble mean of the largest exponent over `seeds` at each noise scale in
/// `sigmas`. Seeds are `base.path_index, base.path_index + 1, …`; the same
/// seeds are reused at every scale.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_sweep(
    variant: Variant,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
    init: &StateVec,
    sigmas: &[f64],
    seeds: usize,
    base: StreamId,
    opts: &LyapunovOptions,
) -> Result<Vec<SweepPoint>> {
    if seeds == 0 {
        return Err(Error::invalid("lyapunov sweep needs at least one seed"));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let mut m = *mp;
            m.noise.sigma = sigma;
            let ests: Vec<LyapunovEstimate> = (0..seeds)
                .into_par_iter()
                .map(|i| {
                    lyapunov_largest(
                        variant,
                        &m,
                        cfg,
                        init,
                        base.with_path(base.path_index + i as u64),
                        opts,
                    )
                })
                .collect::<Result<_>>()?;
            let xs: Vec<f64> = ests.iter().map(|e| e.exponent).collect();
            let (mean, hw) = if seeds == 1 {
                (xs[0], ests[0].half_width)
            } else {
                mean_with_half_width(&xs)
            };
            Ok(SweepPoint {
                sigma,
                mean,
                half_width: hw,
                n_seeds: seeds,
                unreliable: ests.iter().filter(|e| e.unreliable).count(),
            })
        })
        .collect()
}
