use std::path::PathBuf;

use levy_solow::analysis::{
    bifurcation_diagram_with, jacobian_eigs, lyapunov_sweep, phase_line, potential_profile,
    sign_changes, slowfast_error, stability_r, BifurcationDiagram, RootSearch, SlowFastOptions,
    XiRegime,
};
use levy_solow::ensemble::{compare_noise, run_ensemble, EnsembleSpec, EnsembleStats};
use levy_solow::models::{threshold_xi, Component, Variant};
use levy_solow::noise::StreamId;
use levy_solow::sde::simulate;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, OutputDir, Table};

/// Column order for state output.
const COLUMN_ORDER: [Component; 5] = [
    Component::K,
    Component::I,
    Component::X,
    Component::Z,
    Component::P,
];

fn columns(variant: Variant) -> Vec<(Component, usize)> {
    COLUMN_ORDER
        .iter()
        .filter_map(|&c| variant.slot(c).map(|s| (c, s)))
        .collect()
}

fn stream(cfg: &RunConfig) -> StreamId {
    StreamId::new(cfg.seed, cfg.path_index, 0)
}

fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

pub fn simulate_cmd(cfg: &RunConfig, out: &OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let init = cfg.init_state()?;
    let traj = simulate(
        cfg.variant,
        &cfg.params,
        &cfg.integrator,
        &init,
        stream(cfg),
    )?;
    let cols = columns(cfg.variant);
    let mut table = Table::new(std::iter::once("t").chain(cols.iter().map(|(c, _)| c.label())));
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let v = s.as_slice();
        let mut row = vec![Cell::from(*t)];
        row.extend(cols.iter().map(|&(_, i)| Cell::from(v[i])));
        table.push(row);
    }
    let mut jumps = Table::new(["step", "t", "channel", "size"]);
    for j in &traj.jump_log {
        jumps.push(vec![
            j.step.into(),
            (j.step as f64 * traj.dt).into(),
            j.channel.into(),
            j.size.into(),
        ]);
    }
    let summary = json!({
        "variant": cfg.variant,
        "steps": traj.states.len() - 1,
        "clamp_events": traj.meta.clamp_events,
        "jump_events": traj.jump_log.len(),
    });
    Ok(vec![
        out.write("trajectory.csv", &table, summary.clone())?,
        out.write("jumps.csv", &jumps, summary)?,
    ])
}

pub fn bifurcate_cmd(cfg: &RunConfig, out: &OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let search = RootSearch {
        k_max: cfg.bifurcate.k_max,
        ..RootSearch::default()
    };
    let diag: BifurcationDiagram =
        bifurcation_diagram_with(&cfg.bifurcate.gamma_grid, &cfg.params, &search)?;
    let mut table = Table::new(["gamma", "branch", "k", "stability", "residual", "slope"]);
    for set in &diag.branches {
        for (i, e) in set.roots.iter().enumerate() {
            table.push(vec![
                set.gamma.into(),
                BifurcationDiagram::branch_id(set.count(), i).into(),
                e.k.into(),
                e.stability.as_str().into(),
                e.residual.into(),
                e.slope.into(),
            ]);
        }
    }
    let psi = cfg.params.savings.psi();
    let a = cfg.params.production.a;
    let mut r = Table::new(["gamma", "r"]);
    for &g in &diag.gamma_grid {
        r.push(vec![g.into(), stability_r(g, psi, a).into()]);
    }
    let summary = json!({
        "gamma_c": diag.gamma_c,
        "warnings": diag.anomalies.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "max_branch_jump": diag.max_branch_jump(),
    });
    Ok(vec![
        out.write("bifurcation.csv", &table, summary.clone())?,
        out.write("stability_r.csv", &r, summary)?,
    ])
}

pub fn phase_potential_cmd(cfg: &RunConfig, out: &OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg.phase.grid()?;
    let mut files = Vec::with_capacity(cfg.phase.gammas.len());
    for &g in &cfg.phase.gammas {
        let line = phase_line(g, &cfg.params, &grid)?;
        let v = potential_profile(&grid, g, &cfg.params)?;
        let summary = json!({ "gamma": g, "sign_changes": sign_changes(&line) });
        let mut table = Table::new(["k", "dkdt", "V"]);
        for ((k, d), v) in line.into_iter().zip(v) {
            table.push(vec![k.into(), d.into(), v.into()]);
        }
        files.push(out.write(&format!("phase_potential_gamma_{g}.csv"), &table, summary)?);
    }
    Ok(files)
}

pub fn lyapunov_cmd(cfg: &RunConfig, out: &OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let init = cfg.init_state()?;
    let l = &cfg.lyapunov;
    let points = in_pool(cfg.workers, || {
        lyapunov_sweep(
            cfg.variant,
            &cfg.params,
            &cfg.integrator,
            &init,
            &l.sigmas,
            l.seeds,
            stream(cfg),
            &l.options,
        )
    })??;
    let mut table = Table::new(["sigma", "mean", "half_width", "n_seeds", "unreliable"]);
    for p in &points {
        table.push(vec![
            p.sigma.into(),
            p.mean.into(),
            p.half_width.into(),
            p.n_seeds.into(),
            p.unreliable.into(),
        ]);
    }
    let eigs = if cfg.variant == Variant::ThreeEq {
        jacobian_eigs(&init, &cfg.params).ok()
    } else {
        None
    };
    let xi = threshold_xi(&cfg.params);
    let summary = json!({
        "jacobian_eigs_at_init": eigs,
        "xi": xi,
        "xi_regime": XiRegime::of(xi),
    });
    Ok(vec![out.write("lyapunov.csv", &table, summary)?])
}

pub fn slowfast_cmd(cfg: &RunConfig, out: &OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.slowfast;
    if s.eps_list.is_empty() {
        return Err(CliError::Validation(
            "slowfast.eps_list must not be empty".into(),
        ));
    }
    let opts = SlowFastOptions {
        horizon: s.horizon,
        dt_max: s.dt_max,
        k0: s.k0,
        driver: s.driver,
    };
    let runs = in_pool(cfg.workers, || {
        slowfast_error(&cfg.params, &s.eps_list, stream(cfg), &opts)
    })??;
    let mut summary_t = Table::new(["epsilon", "rms", "dt"]);
    let mut paths = Table::new(["epsilon", "t", "k_full", "k_reduced", "X"]);
    for r in &runs {
        summary_t.push(vec![r.epsilon.into(), r.rms.into(), r.dt.into()]);
        for i in 0..r.times.len() {
            paths.push(vec![
                r.epsilon.into(),
                r.times[i].into(),
                r.k_full[i].into(),
                r.k_reduced[i].into(),
                r.x[i].into(),
            ]);
        }
    }
    let summary = json!({ "dt": runs.first().map(|r| r.dt) });
    Ok(vec![
        out.write("slowfast.csv", &summary_t, summary.clone())?,
        out.write("slowfast_paths.csv", &paths, summary)?,
    ])
}

fn stats_table(stats: &EnsembleStats, levels: &[f64]) -> Table {
    let mut header: Vec<String> = ["t", "component", "mean", "var"].map(String::from).to_vec();
    header.extend(levels.iter().map(|q| format!("q{q}")));
    let mut table = Table::new(header);
    for (r, &t) in stats.times.iter().enumerate() {
        for (c, _) in columns(stats.variant) {
            let s = stats.component(c).expect("component present");
            let mut row = vec![
                Cell::from(t),
                Cell::from(c.label()),
                s.mean[r].into(),
                s.variance[r].into(),
            ];
            row.extend(s.quantiles.iter().map(|q| Cell::from(q[r])));
            table.push(row);
        }
    }
    table
}

fn paths_table(stats: &EnsembleStats) -> Table {
    let cols = columns(stats.variant);
    let mut header = vec!["path_index".to_string()];
    header.extend(cols.iter().map(|(c, _)| format!("terminal_{}", c.label())));
    header.extend(["max_abs_dk", "jumps", "clamps"].map(String::from));
    let mut table = Table::new(header);
    for p in &stats.paths {
        let mut row = vec![Cell::from(p.path_index)];
        row.extend(cols.iter().map(|&(_, i)| Cell::from(p.terminal[i])));
        row.extend([p.max_abs_dk.into(), p.jumps.into(), p.clamps.into()]);
        table.push(row);
    }
    table
}

fn stats_summary(stats: &EnsembleStats) -> Value {
    json!({
        "n_ok": stats.n_ok(),
        "failures": stats.failures,
        "jump_events": stats.jump_events,
        "clamp_events": stats.clamp_events,
    })
}

pub fn ensemble_cmd(cfg: &RunConfig, out: &OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let e = &cfg.ensemble;
    let spec = EnsembleSpec {
        n_paths: e.n_paths,
        base_seed: cfg.seed,
        variant: cfg.variant,
        mp: cfg.params,
        cfg: cfg.integrator.clone(),
        init: cfg.init_state()?,
        quantiles: e.quantiles.clone(),
        record_every: e.record_every,
        workers: cfg.workers,
    };
    let levels = &e.quantiles;
    if !e.compare {
        let stats = run_ensemble(&spec)?;
        let summary = stats_summary(&stats);
        return Ok(vec![
            out.write(
                "ensemble.csv",
                &stats_table(&stats, levels),
                summary.clone(),
            )?,
            out.write("ensemble_paths.csv", &paths_table(&stats), summary)?,
        ]);
    }
    let cmp = compare_noise(&spec)?;
    let mut t = Table::new([
        "kurtosis_gaussian",
        "kurtosis_jump",
        "kurtosis_ratio",
        "max_step_gaussian",
        "max_step_jump",
        "max_step_ratio",
        "paths_with_larger_step",
    ]);
    t.push(vec![
        cmp.kurtosis_gaussian.into(),
        cmp.kurtosis_jump.into(),
        cmp.kurtosis_ratio.into(),
        cmp.max_step_gaussian.into(),
        cmp.max_step_jump.into(),
        cmp.max_step_ratio.into(),
        cmp.paths_with_larger_step.into(),
    ]);
    let summary = json!({
        "gaussian": stats_summary(&cmp.gaussian),
        "gaussian_poisson": stats_summary(&cmp.jump),
    });
    Ok(vec![
        out.write("noise_comparison.csv", &t, summary.clone())?,
        out.write(
            "ensemble_gaussian.csv",
            &stats_table(&cmp.gaussian, levels),
            summary.clone(),
        )?,
        out.write(
            "ensemble_gaussian_poisson.csv",
            &stats_table(&cmp.jump, levels),
            summary.clone(),
        )?,
        out.write(
            "ensemble_paths_gaussian.csv",
            &paths_table(&cmp.gaussian),
            summary.clone(),
        )?,
        out.write(
            "ensemble_paths_gaussian_poisson.csv",
            &paths_table(&cmp.jump),
            summary,
        )?,
    ])
}
