//! Euler–Maruyama integration with jump augmentation.
//!
//! One step of every variant reads
//!
//! ```text
//! x_{n+1} = x_n + Δt · drift(x_n) + scale · ΔL_n + Σ jumps_n
//! ```
//!
//! where `ΔL_n` is either `√Δt · Z` or an α-stable increment, depending on the
//! channel's [`Driver`], and jumps are the uncompensated compound-Poisson
//! sizes drawn for that step, added at full size. Capital `k` (and the delayed
//! capital `z` of the slow–fast system) is clamped at `k_min` after the step;
//! clamps are counted, never hidden.
//!
//! Channel `c` of a path draws its diffusion increments from stream channel
//! `2c` and its jumps from `2c + 1`, so switching jumps on or off never moves
//! the Gaussian sequence.

use serde::{Deserialize, Serialize};

use crate::models::{drift, Component, ModelParams, NoiseChannel, StateVec, Variant};
use crate::noise::{NoiseStream, StreamId};
use crate::{Error, Result};

/// Stochastic driver of one noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    GaussianOnly,
    #[default]
    GaussianPoisson,
    AlphaStable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Positivity floor for capital.
    pub k_min: f64,
    /// Driver per noise channel. Channels past the end of the list reuse the
    /// last entry; an empty list means Gaussian plus compound Poisson.
    pub drivers: Vec<Driver>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.01,
            horizon: 50.0,
            k_min: 1e-12,
            drivers: Vec::new(),
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        IntegratorConfig {
            dt,
            horizon,
            ..Default::default()
        }
    }

    pub fn with_drivers(mut self, drivers: Vec<Driver>) -> Self {
        self.drivers = drivers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!(
                "integrator.dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "integrator.horizon must be >= dt, got {} (dt = {})",
                self.horizon, self.dt
            )));
        }
        if !(self.k_min > 0.0) {
            return Err(Error::invalid(format!(
                "integrator.k_min must be > 0, got {}",
                self.k_min
            )));
        }
        Ok(())
    }

    /// Number of steps `N = round(T / Δt)`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn driver(&self, channel: usize) -> Driver {
        self.drivers
            .get(channel)
            .or(self.drivers.last())
            .copied()
            .unwrap_or_default()
    }
}

/// Open streams for every noise channel of one path.
#[derive(Debug, Clone)]
pub struct ChannelStreams {
    channels: Vec<NoiseChannel>,
    diffusion: Vec<NoiseStream>,
    jumps: Vec<NoiseStream>,
}

impl ChannelStreams {
    /// Streams for `(stream.seed, stream.path_index)`; `stream.channel` is
    /// ignored, channels are numbered by the variant.
    pub fn open(variant: Variant, mp: &ModelParams, stream: StreamId) -> Self {
        let channels = variant.noise_channels(mp);
        let n = channels.len() as u64;
        ChannelStreams {
            channels,
            diffusion: (0..n).map(|c| stream.with_channel(2 * c).open()).collect(),
            jumps: (0..n)
                .map(|c| stream.with_channel(2 * c + 1).open())
                .collect(),
        }
    }

    pub fn channels(&self) -> &[NoiseChannel] {
        &self.channels
    }
}

/// One jump drawn for a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpDraw {
    pub channel: usize,
    pub slot: usize,
    pub size: f64,
}

/// All random input of a single step, so that two states can be advanced
/// with the same realization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepNoise {
    /// Scaled diffusion increment per state slot.
    pub diffusion: [f64; 4],
    pub jumps: Vec<JumpDraw>,
}

impl StepNoise {
    pub fn zero() -> Self {
        Self::default()
    }
}

pub fn draw_step_noise(
    streams: &mut ChannelStreams,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<StepNoise> {
    let mut noise = StepNoise::zero();
    let dt = cfg.dt;
    for (c, ch) in streams.channels.iter().enumerate() {
        let d = &mut streams.diffusion[c];
        match cfg.driver(c) {
            Driver::GaussianOnly => {
                noise.diffusion[ch.slot] += ch.scale * d.gaussian_increment(dt)?;
            }
            Driver::GaussianPoisson => {
                noise.diffusion[ch.slot] += ch.scale * d.gaussian_increment(dt)?;
                if ch.jumps {
                    let sizes =
                        streams.jumps[c].jump_batch(mp.noise.lambda, dt, &mp.noise.jump_law)?;
                    noise.jumps.extend(sizes.into_iter().map(|size| JumpDraw {
                        channel: c,
                        slot: ch.slot,
                        size,
                    }));
                }
            }
            Driver::AlphaStable => {
                let inc = d.stable_increment(mp.noise.alpha_stable, mp.noise.skew, dt)?;
                noise.diffusion[ch.slot] += ch.scale * inc;
            }
        }
    }
    Ok(noise)
}

/// Deterministic part of one Euler–Maruyama step: apply drift, the given
/// noise, then the positivity floor. Returns the new state and whether a
/// clamp happened. `step` is the index of the incoming state.
pub fn advance(
    state: &StateVec,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
    noise: &StepNoise,
    step: usize,
) -> Result<(StateVec, bool)> {
    if !state.is_finite() {
        return Err(Error::NonFiniteState { step });
    }
    let d = drift(state, mp)?;
    let mut next = *state;
    {
        let out = next.as_mut_slice();
        for (i, x) in out.iter_mut().enumerate() {
            *x += cfg.dt * d.as_slice()[i] + noise.diffusion[i];
        }
        for j in &noise.jumps {
            out[j.slot] += j.size;
        }
    }
    if !next.is_finite() {
        return Err(Error::NonFiniteState { step: step + 1 });
    }
    let mut clamped = false;
    let variant = state.variant();
    for c in [Component::K, Component::Z] {
        if let Some(slot) = variant.slot(c) {
            let x = &mut next.as_mut_slice()[slot];
            if *x < cfg.k_min {
                *x = cfg.k_min;
                clamped = true;
            }
        }
    }
    Ok((next, clamped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: StateVec,
    pub clamped: bool,
    pub jumps: Vec<JumpDraw>,
}

/// One Euler–Maruyama step drawing fresh noise from `streams`.
pub fn em_step(
    state: &StateVec,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
    streams: &mut ChannelStreams,
    step: usize,
) -> Result<StepOutcome> {
    let noise = draw_step_noise(streams, mp, cfg)?;
    let (state, clamped) = advance(state, mp, cfg, &noise, step)?;
    Ok(StepOutcome {
        state,
        clamped,
        jumps: noise.jumps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Index of the first state that contains the jump.
    pub step: usize,
    pub channel: usize,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub path_index: u64,
    pub variant: Variant,
    pub params: ModelParams,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    pub jump_log: Vec<JumpEvent>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn variant(&self) -> Variant {
        self.meta.variant
    }

    pub fn component(&self, c: Component) -> Option<Vec<f64>> {
        let slot = self.variant().slot(c)?;
        Some(self.states.iter().map(|s| s.as_slice()[slot]).collect())
    }

    pub fn last(&self) -> &StateVec {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Largest single-step displacement of component `c`.
    pub fn max_step(&self, c: Component) -> Option<f64> {
        let xs = self.component(c)?;
        Some(
            xs.windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn jumps_on(&self, channel: usize) -> impl Iterator<Item = &JumpEvent> {
        self.jump_log.iter().filter(move |j| j.channel == channel)
    }
}

/// Integrate `variant` from `init` over `cfg.horizon`.
pub fn simulate(
    variant: Variant,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
    init: &StateVec,
    stream: StreamId,
) -> Result<Trajectory> {
    mp.validate()?;
    cfg.validate()?;
    if init.variant() != variant {
        return Err(Error::invalid(format!(
            "initial state is {} but variant is {}",
            init.variant().name(),
            variant.name()
        )));
    }
    if !init.is_finite() {
        return Err(Error::NonFiniteState { step: 0 });
    }
    if let Some(k) = init.k() {
        if !(k > 0.0) {
            return Err(Error::invalid(format!(
                "initial capital must be > 0, got {k}"
            )));
        }
    }
    let n = cfg.n_steps();
    let mut streams = ChannelStreams::open(variant, mp, stream);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut jump_log = Vec::new();
    let mut clamp_events = 0;
    times.push(0.0);
    states.push(*init);
    let mut state = *init;
    for step in 0..n {
        let out = em_step(&state, mp, cfg, &mut streams, step)?;
        clamp_events += usize::from(out.clamped);
        jump_log.extend(out.jumps.iter().map(|j| JumpEvent {
            step: step + 1,
            channel: j.channel,
            size: j.size,
        }));
        state = out.state;
        times.push((step + 1) as f64 * cfg.dt);
        states.push(state);
    }
    Ok(Trajectory {
        dt: cfg.dt,
        times,
        states,
        jump_log,
        meta: TrajectoryMeta {
            seed: stream.seed,
            path_index: stream.path_index,
            variant,
            params: *mp,
            clamp_events,
        },
    })
}

/// Exact Ornstein–Uhlenbeck transition over `dt` driven by the standard
/// normal `z`.
pub fn ou_exact_step(x: f64, eta: f64, sigma: f64, dt: f64, z: f64) -> f64 {
    let decay = (-eta * dt).exp();
    x * decay + sigma * (-(-2.0 * eta * dt).exp_m1() / (2.0 * eta)).sqrt() * z
}

/// RMS endpoint error of Euler–Maruyama against the exact OU solution,
/// for each step size in `dt_list`.
///
/// Only the linear variants have an exact oracle: `Ou` (rate `eta_a`) and
/// `LinearDecay` (rate `rho`). All step sizes must be integer multiples of
/// the smallest one. On the finest grid the Brownian increment `ΔW` and the
/// exact stochastic integral `∫ e^{-θ(h-s)} dW` are drawn jointly, so the
/// coarse Euler paths and the exact path share one Brownian motion.
pub fn strong_error(
    variant: Variant,
    mp: &ModelParams,
    dt_list: &[f64],
    horizon: f64,
    x0: f64,
    n_paths: usize,
    stream: StreamId,
) -> Result<Vec<(f64, f64)>> {
    let rate = match variant {
        Variant::Ou => mp.eta_a,
        Variant::LinearDecay => mp.rho,
        other => {
            return Err(Error::invalid(format!(
                "no exact oracle for variant {}",
                other.name()
            )))
        }
    };
    if dt_list.is_empty() || n_paths == 0 {
        return Err(Error::invalid(
            "strong_error needs at least one step size and one path",
        ));
    }
    let h = dt_list.iter().copied().fold(f64::INFINITY, f64::min);
    if !(h > 0.0) {
        return Err(Error::invalid("step sizes must be > 0"));
    }
    let as_multiple = |x: f64, what: &str| -> Result<usize> {
        let r = x / h;
        let m = r.round();
        if m < 1.0 || (r - m).abs() > 1e-9 * m {
            Err(Error::invalid(format!(
                "{what} {x} is not a multiple of {h}"
            )))
        } else {
            Ok(m as usize)
        }
    };
    let ratios: Vec<usize> = dt_list
        .iter()
        .map(|&dt| as_multiple(dt, "step"))
        .collect::<Result<_>>()?;
    let n_fine = as_multiple(horizon, "horizon")?;
    for (&m, &dt) in ratios.iter().zip(dt_list) {
        if n_fine % m != 0 {
            return Err(Error::invalid(format!(
                "horizon {horizon} is not a multiple of {dt}"
            )));
        }
    }

    let sigma = mp.noise.sigma;
    let var_i = -(-2.0 * rate * h).exp_m1() / (2.0 * rate);
    let cov = -(-rate * h).exp_m1() / rate;
    let load = cov / h.sqrt();
    let resid = (var_i - load * load).max(0.0).sqrt();

    let init = StateVec::from_slice(variant, &[x0])?;
    let mut sq = vec![0.0; dt_list.len()];
    let mut dw = vec![0.0; n_fine];
    for p in 0..n_paths {
        let mut s = stream.with_path(stream.path_index + p as u64).open();
        let mut exact = x0;
        for w in dw.iter_mut() {
            let z1 = s.standard_normal();
            let z2 = s.standard_normal();
            *w = h.sqrt() * z1;
            let integral = load * z1 + resid * z2;
            let z = if var_i > 0.0 {
                integral / var_i.sqrt()
            } else {
                0.0
            };
            exact = ou_exact_step(exact, rate, sigma, h, z);
        }
        for (e, (&m, &dt)) in ratios.iter().zip(dt_list).enumerate() {
            let cfg = IntegratorConfig {
                dt,
                horizon,
                k_min: f64::MIN_POSITIVE,
                drivers: vec![],
            };
            let mut state = init;
            for (step, chunk) in dw.chunks(m).enumerate() {
                let mut noise = StepNoise::zero();
                noise.diffusion[0] = sigma * chunk.iter().sum::<f64>();
                state = advance(&state, mp, &cfg, &noise, step)?.0;
            }
            let err = state.as_slice()[0] - exact;
            sq[e] += err * err;
        }
    }
    Ok(dt_list
        .iter()
        .zip(sq)
        .map(|(&dt, s)| (dt, (s / n_paths as f64).sqrt()))
        .collect())
}

/// Least-squares slope of `ln(error)` against `ln(dt)`.
pub fn convergence_slope(errors: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = errors.iter().map(|&(dt, e)| (dt.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut mp: ModelParams) -> ModelParams {
        mp.noise.sigma = 0.0;
        mp.noise.lambda = 0.0;
        mp
    }

    #[test]
    fn explicit_euler_pure_decay() {
        let mut mp = quiet(ModelParams::figure5());
        mp.rho = 0.02;
        let cfg = IntegratorConfig::new(0.01, 1.0);
        let mut streams = ChannelStreams::open(Variant::LinearDecay, &mp, StreamId::new(1, 0, 0));
        let out = em_step(&StateVec::linear_decay(1.0), &mp, &cfg, &mut streams, 0).unwrap();
        assert!((out.state.as_slice()[0] - 0.9998).abs() < 1e-15);
    }

    #[test]
    fn zero_drift_step_equals_gaussian_increment() {
        let mut mp = ModelParams::figure5();
        mp.noise.sigma = 1.0;
        mp.noise.lambda = 0.0;
        let cfg = IntegratorConfig::new(0.01, 1.0);
        let id = StreamId::new(9, 3, 0);
        let mut streams = ChannelStreams::open(Variant::Ou, &mp, id);
        // X = 0 makes the mean-reversion drift vanish
        let out = em_step(&StateVec::ou(0.0), &mp, &cfg, &mut streams, 0).unwrap();
        let expected = id.with_channel(0).open().gaussian_increment(0.01).unwrap();
        assert_eq!(out.state.as_slice()[0], expected);
    }

    #[test]
    fn non_finite_input_is_reported() {
        let mp = ModelParams::figure5();
        let cfg = IntegratorConfig::default();
        let mut streams = ChannelStreams::open(Variant::Reduced, &mp, StreamId::new(1, 0, 0));
        let err = em_step(
            &StateVec::reduced(f64::NAN, 0.0),
            &mp,
            &cfg,
            &mut streams,
            7,
        );
        assert_eq!(err.unwrap_err(), Error::NonFiniteState { step: 7 });
    }

    #[test]
    fn clamps_capital_and_counts() {
        let mut mp = quiet(ModelParams::figure5());
        mp.rho = 200.0;
        let cfg = IntegratorConfig::new(0.01, 0.05);
        let tr = simulate(
            Variant::LinearDecay,
            &mp,
            &cfg,
            &StateVec::linear_decay(1.0),
            StreamId::new(1, 0, 0),
        )
        .unwrap();
        assert_eq!(tr.meta.clamp_events, 5);
        assert!(tr.states.iter().all(|s| s.k().unwrap() > 0.0));
    }

    #[test]
    fn deterministic_balanced_stays_put() {
        let mp = ModelParams::balanced(1.5);
        let cfg = IntegratorConfig::new(0.01, 5.0);
        let tr = simulate(
            Variant::Deterministic,
            &mp,
            &cfg,
            &StateVec::deterministic(1.0),
            StreamId::new(0, 0, 0),
        )
        .unwrap();
        assert_eq!(tr.states.len(), 501);
        assert!(tr.states.iter().all(|s| s.k() == Some(1.0)));
    }

    #[test]
    fn reduced_without_noise_matches_deterministic() {
        let mut mp = quiet(ModelParams::balanced(3.0));
        mp.noise.sigma = 0.0;
        let cfg = IntegratorConfig::new(0.01, 10.0);
        let red = simulate(
            Variant::Reduced,
            &mp,
            &cfg,
            &StateVec::reduced(0.4, 0.0),
            StreamId::new(3, 0, 0),
        )
        .unwrap();
        let det = simulate(
            Variant::Deterministic,
            &mp,
            &cfg,
            &StateVec::deterministic(0.4),
            StreamId::new(3, 0, 0),
        )
        .unwrap();
        assert_eq!(red.component(Component::K), det.component(Component::K));
    }

    #[test]
    fn simulate_is_repeatable() {
        let mp = ModelParams::figure5();
        let cfg = IntegratorConfig::new(0.01, 5.0);
        let init = StateVec::default_init(Variant::ThreeEq, &mp);
        let a = simulate(Variant::ThreeEq, &mp, &cfg, &init, StreamId::new(5, 2, 0)).unwrap();
        let b = simulate(Variant::ThreeEq, &mp, &cfg, &init, StreamId::new(5, 2, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ou_exact_step_limits() {
        assert_eq!(ou_exact_step(0.0, 0.1, 0.1, 0.01, 0.0), 0.0);
        let dt = 1e-8;
        let coef = ou_exact_step(0.0, 0.1, 0.3, dt, 1.0);
        assert!((coef - 0.3 * dt.sqrt()).abs() < 1e-8 * coef);
    }

    #[test]
    fn ou_exact_stationary_variance() {
        let mut s = StreamId::new(11, 0, 0).open();
        let (eta, sigma, dt) = (0.1, 0.1, 1.0);
        let mut x = 0.0;
        for _ in 0..200 {
            x = ou_exact_step(x, eta, sigma, dt, s.standard_normal());
        }
        let n = 200_000;
        let mut acc = Vec::with_capacity(n);
        // thinning by 50 time units leaves correlation e^-5
        for _ in 0..n {
            x = ou_exact_step(x, eta, sigma, 50.0, s.standard_normal());
            acc.push(x);
        }
        let v = crate::stats::variance(&acc);
        assert!(
            (v - 0.05).abs() < 3.0 * 0.05 * (2.0 / n as f64).sqrt() + 1e-4,
            "variance {v}"
        );
    }

    #[test]
    fn strong_error_linear_decay_first_order() {
        let mut mp = quiet(ModelParams::figure5());
        mp.rho = 0.7;
        let errs = strong_error(
            Variant::LinearDecay,
            &mp,
            &[0.04, 0.02, 0.01, 0.005],
            1.0,
            1.0,
            1,
            StreamId::new(0, 0, 0),
        )
        .unwrap();
        let slope = convergence_slope(&errs);
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
        for w in errs.windows(2) {
            let ratio = w[0].1 / w[1].1;
            assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn strong_error_rejects_nonlinear_variant() {
        let mp = ModelParams::figure5();
        assert!(strong_error(
            Variant::ThreeEq,
            &mp,
            &[0.01],
            1.0,
            1.0,
            1,
            StreamId::new(0, 0, 0)
        )
        .is_err());
        assert!(strong_error(
            Variant::Ou,
            &mp,
            &[0.01, 0.015],
            1.0,
            1.0,
            1,
            StreamId::new(0, 0, 0)
        )
        .is_err());
    }

    #[test]
    fn driver_lookup_repeats_last() {
        let cfg = IntegratorConfig::default()
            .with_drivers(vec![Driver::GaussianOnly, Driver::AlphaStable]);
        assert_eq!(cfg.driver(0), Driver::GaussianOnly);
        assert_eq!(cfg.driver(1), Driver::AlphaStable);
        assert_eq!(cfg.driver(5), Driver::AlphaStable);
        assert_eq!(
            IntegratorConfig::default().driver(2),
            Driver::GaussianPoisson
        );
    }
}
