//! Reduction error of the slow system against the full slow–fast system.
//!
//! Both systems share the shock channel, so with a common step size they see
//! the same `X(t)` path bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{slaved_p, Component, ModelParams, StateVec, Variant};
use crate::noise::StreamId;
use crate::sde::{simulate, Driver, IntegratorConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlowFastOptions {
    pub horizon: f64,
    /// Upper bound on the step; the step actually used is
    /// `min(dt_max, min(ε)/10)` for every ε.
    pub dt_max: f64,
    pub k0: f64,
    pub driver: Driver,
}

impl Default for SlowFastOptions {
    fn default() -> Self {
        SlowFastOptions {
            horizon: 20.0,
            dt_max: 0.01,
            k0: 0.5,
            driver: Driver::AlphaStable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowFastRun {
    pub epsilon: f64,
    pub dt: f64,
    pub rms: f64,
    pub times: Vec<f64>,
    pub k_full: Vec<f64>,
    pub k_reduced: Vec<f64>,
    pub x: Vec<f64>,
}

/// Step size shared by every ε in `eps_list`.
pub fn common_dt(eps_list: &[f64], dt_max: f64) -> f64 {
    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    dt_max.min(eps_min / 10.0)
}

fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// For each ε, integrate the full system (started on the slaving manifold)
/// and the reduced system from the same `k0` with the same shock noise, and
/// report the RMS of `k_full − k_reduced` over the time grid.
pub fn slowfast_error(
    mp: &ModelParams,
    eps_list: &[f64],
    stream: StreamId,
    opts: &SlowFastOptions,
) -> Result<Vec<SlowFastRun>> {
    if eps_list.is_empty() {
        return Err(Error::invalid("slowfast needs a non-empty epsilon list"));
    }
    if let Some(&e) = eps_list.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::invalid(format!("epsilon must be > 0, got {e}")));
    }
    if !(opts.k0 > 0.0) {
        return Err(Error::invalid(format!(
            "slowfast k0 must be > 0, got {}",
            opts.k0
        )));
    }
    let dt = common_dt(eps_list, opts.dt_max);
    let cfg = IntegratorConfig::new(dt, opts.horizon).with_drivers(vec![opts.driver]);
    cfg.validate()?;

    let reduced = simulate(
        Variant::Reduced,
        mp,
        &cfg,
        &StateVec::reduced(opts.k0, 0.0),
        stream,
    )?;
    let k_reduced = reduced.component(Component::K).unwrap_or_default();
    let x = reduced.component(Component::X).unwrap_or_default();

    eps_list
        .par_iter()
        .map(|&eps| {
            let mut m = *mp;
            m.epsilon_ts = eps;
            let init = StateVec::full4(opts.k0, opts.k0, slaved_p(opts.k0, 0.0, &m)?, 0.0);
            let full = simulate(Variant::Full4, &m, &cfg, &init, stream)?;
            let k_full = full.component(Component::K).unwrap_or_default();
            Ok(SlowFastRun {
                epsilon: eps,
                dt,
                rms: rms_diff(&k_full, &k_reduced),
                times: full.times,
                k_full,
                k_reduced: k_reduced.clone(),
                x: x.clone(),
            })
        })
        .collect()
}
