//! Monte Carlo ensembles.
//!
//! Paths run in parallel, one task per path, each with its own noise streams
//! `(base_seed, path_index, channel)`. Results are collected in path order and
//! reduced sequentially, so the statistics do not depend on the number of
//! workers or on scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::models::{Component, ModelParams, StateVec, Variant};
use crate::noise::StreamId;
use crate::sde::{em_step, ChannelStreams, Driver, IntegratorConfig};
use crate::stats::{kurtosis, mean, quantile_sorted, variance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub base_seed: u64,
    pub variant: Variant,
    pub mp: ModelParams,
    pub cfg: IntegratorConfig,
    pub init: StateVec,
    /// Ascending, each in `(0, 1)`.
    pub quantiles: Vec<f64>,
    /// Record statistics every this many steps. The initial and final times
    /// are always recorded.
    pub record_every: usize,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl EnsembleSpec {
    pub fn new(variant: Variant, mp: ModelParams, cfg: IntegratorConfig, n_paths: usize) -> Self {
        EnsembleSpec {
            n_paths,
            base_seed: 0,
            variant,
            init: StateVec::default_init(variant, &mp),
            mp,
            cfg,
            quantiles: vec![0.05, 0.5, 0.95],
            record_every: 10,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mp.validate()?;
        self.cfg.validate()?;
        if self.n_paths == 0 {
            return Err(Error::invalid("ensemble.n_paths must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("ensemble.record_every must be >= 1"));
        }
        if self.init.variant() != self.variant {
            return Err(Error::invalid(
                "ensemble initial state does not match the variant",
            ));
        }
        if self.quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::invalid("ensemble quantiles must lie in (0, 1)"));
        }
        if self.quantiles.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("ensemble quantiles must be sorted"));
        }
        Ok(())
    }

    /// Step indices at which statistics are recorded.
    pub fn record_steps(&self) -> Vec<usize> {
        let n = self.cfg.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.record_every).collect();
        if steps.last() != Some(&n) {
            steps.push(n);
        }
        steps
    }
}

/// Time series of one component across the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentStats {
    pub component: Component,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `quantiles[j][t]` is the `j`-th requested quantile at time index `t`.
    pub quantiles: Vec<Vec<f64>>,
}

/// Per-path summary kept for paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub path_index: u64,
    pub terminal: Vec<f64>,
    /// Largest single-step `|Δk|`; NaN for variants without capital.
    pub max_abs_dk: f64,
    pub jumps: usize,
    pub clamps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFailure {
    pub path_index: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub variant: Variant,
    pub times: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    pub components: Vec<ComponentStats>,
    pub jump_events: usize,
    pub clamp_events: usize,
    pub paths: Vec<PathSummary>,
    pub failures: Vec<PathFailure>,
}

impl EnsembleStats {
    pub fn component(&self, c: Component) -> Option<&ComponentStats> {
        self.components.iter().find(|s| s.component == c)
    }

    pub fn n_ok(&self) -> usize {
        self.paths.len()
    }

    /// Terminal values of `c` over the successful paths, in path order.
    pub fn terminal(&self, c: Component) -> Option<Vec<f64>> {
        let slot = self.variant.slot(c)?;
        Some(self.paths.iter().map(|p| p.terminal[slot]).collect())
    }
}

struct PathRecord {
    summary: PathSummary,
    /// Row-major `[record][component]`.
    samples: Vec<f64>,
}

fn run_path(spec: &EnsembleSpec, path_index: u64, record: &[usize]) -> Result<PathRecord> {
    let variant = spec.variant;
    let dim = variant.dim();
    let k_slot = variant.slot(Component::K);
    let mut streams = ChannelStreams::open(
        variant,
        &spec.mp,
        StreamId::new(spec.base_seed, path_index, 0),
    );
    let mut state = spec.init;
    let mut samples = Vec::with_capacity(record.len() * dim);
    samples.extend_from_slice(state.as_slice());
    let mut next_rec = 1;
    let (mut jumps, mut clamps) = (0, 0);
    let mut max_abs_dk = if k_slot.is_some() { 0.0_f64 } else { f64::NAN };
    for step in 0..spec.cfg.n_steps() {
        let out = em_step(&state, &spec.mp, &spec.cfg, &mut streams, step)?;
        if let Some(s) = k_slot {
            max_abs_dk = max_abs_dk.max((out.state.as_slice()[s] - state.as_slice()[s]).abs());
        }
        jumps += out.jumps.len();
        clamps += usize::from(out.clamped);
        state = out.state;
        if record.get(next_rec) == Some(&(step + 1)) {
            samples.extend_from_slice(state.as_slice());
            next_rec += 1;
        }
    }
    Ok(PathRecord {
        summary: PathSummary {
            path_index,
            terminal: state.as_slice().to_vec(),
            max_abs_dk,
            jumps,
            clamps,
        },
        samples,
    })
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Simulate `spec.n_paths` paths and aggregate per-time statistics. Paths
/// that fail are left out of the statistics and listed in `failures`.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleStats> {
    spec.validate()?;
    let record = spec.record_steps();
    let results: Vec<Result<PathRecord>> = with_workers(spec.workers, || {
        (0..spec.n_paths as u64)
            .into_par_iter()
            .map(|i| run_path(spec, i, &record))
            .collect()
    })?;

    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => ok.push(p),
            Err(e) => failures.push(PathFailure {
                path_index: i as u64,
                error: e.to_string(),
            }),
        }
    }

    let dim = spec.variant.dim();
    let components = spec
        .variant
        .components()
        .iter()
        .enumerate()
        .map(|(c, &component)| {
            let mut st = ComponentStats {
                component,
                mean: Vec::with_capacity(record.len()),
                variance: Vec::with_capacity(record.len()),
                quantiles: vec![Vec::with_capacity(record.len()); spec.quantiles.len()],
            };
            let mut col = Vec::with_capacity(ok.len());
            for r in 0..record.len() {
                col.clear();
                col.extend(ok.iter().map(|p| p.samples[r * dim + c]));
                st.mean.push(mean(&col));
                st.variance.push(variance(&col));
                col.sort_by(f64::total_cmp);
                for (j, &q) in spec.quantiles.iter().enumerate() {
                    st.quantiles[j].push(quantile_sorted(&col, q));
                }
            }
            st
        })
        .collect();

    let paths: Vec<PathSummary> = ok.into_iter().map(|p| p.summary).collect();
    Ok(EnsembleStats {
        variant: spec.variant,
        times: record.iter().map(|&s| s as f64 * spec.cfg.dt).collect(),
        quantile_levels: spec.quantiles.clone(),
        components,
        jump_events: paths.iter().map(|p| p.jumps).sum(),
        clamp_events: paths.iter().map(|p| p.clamps).sum(),
        paths,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseComparison {
    pub gaussian: EnsembleStats,
    pub jump: EnsembleStats,
    /// Moment-ratio kurtosis of terminal `k`, Gaussian then jump driver.
    pub kurtosis_gaussian: f64,
    pub kurtosis_jump: f64,
    /// Jump over Gaussian; 1 when both are equal.
    pub kurtosis_ratio: f64,
    /// Largest single-step `|Δk|` over all paths.
    pub max_step_gaussian: f64,
    pub max_step_jump: f64,
    pub max_step_ratio: f64,
    /// Paired paths whose jump-driven max step exceeds the Gaussian one.
    pub paths_with_larger_step: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

/// Run `spec` twice with the same seeds, once with Gaussian increments only
/// and once with compound-Poisson jumps added on every channel. The Gaussian
/// increments coincide between the two runs.
pub fn compare_noise(spec: &EnsembleSpec) -> Result<NoiseComparison> {
    if spec.variant.slot(Component::K).is_none() {
        return Err(Error::invalid(
            "noise comparison needs a variant with capital",
        ));
    }
    let mut g = spec.clone();
    g.cfg.drivers = vec![Driver::GaussianOnly];
    let mut j = spec.clone();
    j.cfg.drivers = vec![Driver::GaussianPoisson];
    let gaussian = run_ensemble(&g)?;
    let jump = run_ensemble(&j)?;

    let tk = |s: &EnsembleStats| kurtosis(&s.terminal(Component::K).unwrap_or_default());
    let max_step = |s: &EnsembleStats| s.paths.iter().map(|p| p.max_abs_dk).fold(0.0, f64::max);
    let (kg, kj) = (tk(&gaussian), tk(&jump));
    let (mg, mj) = (max_step(&gaussian), max_step(&jump));
    let paths_with_larger_step = gaussian
        .paths
        .iter()
        .filter_map(|pg| {
            jump.paths
                .iter()
                .find(|pj| pj.path_index == pg.path_index)
                .map(|pj| pj.max_abs_dk > pg.max_abs_dk)
        })
        .filter(|&b| b)
        .count();
    Ok(NoiseComparison {
        kurtosis_gaussian: kg,
        kurtosis_jump: kj,
        kurtosis_ratio: ratio(kj, kg),
        max_step_gaussian: mg,
        max_step_jump: mj,
        max_step_ratio: ratio(mj, mg),
        paths_with_larger_step,
        gaussian,
        jump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::simulate;

    fn quiet(mut mp: ModelParams) -> ModelParams {
        mp.noise.sigma = 0.0;
        mp.noise.lambda = 0.0;
        mp
    }

    #[test]
    fn degenerate_ensemble_tracks_deterministic_path() {
        let mp = quiet(ModelParams::balanced(4.0));
        let cfg = IntegratorConfig::new(0.01, 5.0);
        let mut spec = EnsembleSpec::new(Variant::Reduced, mp, cfg.clone(), 8);
        spec.init = StateVec::reduced(0.6, 0.0);
        let stats = run_ensemble(&spec).unwrap();
        let det = simulate(
            Variant::Reduced,
            &mp,
            &cfg,
            &spec.init,
            StreamId::new(0, 0, 0),
        )
        .unwrap();
        let k = stats.component(Component::K).unwrap();
        for (r, &t) in stats.times.iter().enumerate() {
            let step = (t / cfg.dt).round() as usize;
            assert!(k.variance[r] < 1e-30);
            let want = det.states[step].as_slice()[0];
            assert!((k.mean[r] - want).abs() <= 4.0 * f64::EPSILON * want.abs());
        }
    }

    #[test]
    fn singleton_matches_single_path() {
        let mp = ModelParams::figure5();
        let cfg = IntegratorConfig::new(0.01, 2.0);
        let mut spec = EnsembleSpec::new(Variant::Capital, mp, cfg.clone(), 1);
        spec.base_seed = 11;
        spec.record_every = 1;
        let stats = run_ensemble(&spec).unwrap();
        let path = simulate(
            Variant::Capital,
            &mp,
            &cfg,
            &spec.init,
            StreamId::new(11, 0, 0),
        )
        .unwrap();
        let k = stats.component(Component::K).unwrap();
        let want: Vec<f64> = path.states.iter().map(|s| s.as_slice()[0]).collect();
        assert_eq!(k.mean, want);
        for q in &k.quantiles {
            assert_eq!(q, &want);
        }
        assert_eq!(stats.jump_events, path.jump_log.len());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut mp = ModelParams::figure5();
        mp.noise.lambda = 0.5;
        let mut spec =
            EnsembleSpec::new(Variant::Capital, mp, IntegratorConfig::new(0.01, 3.0), 64);
        spec.workers = 1;
        let a = run_ensemble(&spec).unwrap();
        spec.workers = 4;
        let b = run_ensemble(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn record_grid_includes_end() {
        let spec = EnsembleSpec {
            record_every: 3,
            ..EnsembleSpec::new(
                Variant::Ou,
                ModelParams::figure5(),
                IntegratorConfig::new(0.1, 1.0),
                1,
            )
        };
        assert_eq!(spec.record_steps(), vec![0, 3, 6, 9, 10]);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = EnsembleSpec::new(
            Variant::Ou,
            ModelParams::figure5(),
            IntegratorConfig::new(0.1, 1.0),
            1,
        );
        let bad = [
            EnsembleSpec {
                n_paths: 0,
                ..base.clone()
            },
            EnsembleSpec {
                quantiles: vec![0.5, 0.1],
                ..base.clone()
            },
            EnsembleSpec {
                quantiles: vec![1.0],
                ..base.clone()
            },
            EnsembleSpec {
                record_every: 0,
                ..base.clone()
            },
            EnsembleSpec {
                init: StateVec::capital(1.0),
                ..base.clone()
            },
        ];
        for s in bad {
            assert!(run_ensemble(&s).is_err());
        }
    }

    #[test]
    fn failed_paths_are_counted() {
        let mut mp = ModelParams::figure5();
        // explicit Euler is unstable on the fast rows when dt ≫ ε
        mp.epsilon_ts = 1e-6;
        let spec = EnsembleSpec::new(Variant::Full4, mp, IntegratorConfig::new(0.01, 1.0), 3);
        let stats = run_ensemble(&spec).unwrap();
        assert_eq!(stats.failures.len(), 3);
        assert_eq!(stats.n_ok(), 0);
    }

    #[test]
    fn zero_intensity_comparison_is_identical() {
        let mut mp = ModelParams::figure5();
        mp.noise.lambda = 0.0;
        let spec = EnsembleSpec::new(Variant::Capital, mp, IntegratorConfig::new(0.01, 2.0), 16);
        let c = compare_noise(&spec).unwrap();
        assert_eq!(c.gaussian, c.jump);
        assert_eq!(c.kurtosis_ratio, 1.0);
        assert_eq!(c.max_step_ratio, 1.0);
        assert_eq!(c.paths_with_larger_step, 0);
    }
}
