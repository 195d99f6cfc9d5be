//! Equilibria of `dk/dt = β s(k,γ) k^a − k` and their continuation in γ.

use serde::{Deserialize, Serialize};

use crate::models::{rhs_deterministic, rhs_deterministic_deriv, ModelParams};
use crate::{Error, Result};

/// Decay rate of perturbations of `k = 1` under balanced normalization:
/// `1 − a − ½ (ψ−1)/(ψ+1) γ`.
pub fn stability_r(gamma: f64, psi: f64, a: f64) -> f64 {
    1.0 - a - 0.5 * (psi - 1.0) / (psi + 1.0) * gamma
}

/// Steepness at which `stability_r` changes sign: `2 (ψ+1)/(ψ−1) (1−a)`.
pub fn critical_gamma(psi: f64, a: f64) -> Result<f64> {
    if !(psi > 1.0) {
        return Err(Error::invalid(format!(
            "psi = s2/s1 must exceed 1, got {psi}"
        )));
    }
    Ok(2.0 * (psi + 1.0) / (psi - 1.0) * (1.0 - a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn from_slope(slope: f64) -> Self {
        if slope < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub k: f64,
    pub stability: Stability,
    /// `|rhs(k)|` at the returned root.
    pub residual: f64,
    /// `d/dk rhs` at the root.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub gamma: f64,
    /// Sorted by `k`.
    pub roots: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn ks(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.k).collect()
    }

    /// Anomaly report when the root count is neither 1 nor 3.
    pub fn check(&self) -> Result<()> {
        match self.count() {
            1 | 3 => Ok(()),
            count => Err(Error::EquilibriumAnomaly {
                gamma: self.gamma,
                count,
            }),
        }
    }
}

/// Bracketing grid and tolerances for the root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    pub k_lo: f64,
    pub k_max: f64,
    pub grid_points: usize,
    /// Roots closer than this are merged.
    pub merge_tol: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        RootSearch {
            k_lo: 1e-4,
            k_max: 10.0,
            grid_points: 10_000,
            merge_tol: 1e-6,
        }
    }
}

impl RootSearch {
    fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.k_lo.ln(), self.k_max.ln());
        let n = self.grid_points.max(2);
        (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// Bisection on `[a, b]` with `f(a)·f(b) < 0`, run to machine resolution.
/// Returns the endpoint with the smaller residual.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    if fa.abs() <= fb.abs() {
        a
    } else {
        b
    }
}

/// Every root of the deterministic drift in `[search.k_lo, search.k_max]`,
/// without checking the count.
///
/// The grid is log-spaced. Critical points of the drift are located first
/// (sign changes of its analytic derivative) and inserted as breakpoints, so
/// that two roots sharing one grid cell, as happens next to the bifurcation,
/// are still separated by a sign change.
pub fn equilibria_with(gamma: f64, mp: &ModelParams, search: &RootSearch) -> EquilibriumSet {
    let mp = mp.with_gamma(gamma);
    let f = |k: f64| rhs_deterministic(k, &mp);
    let df = |k: f64| rhs_deterministic_deriv(k, &mp);

    let grid = search.grid();
    let mut points = Vec::with_capacity(grid.len() + 8);
    points.push(grid[0]);
    for w in grid.windows(2) {
        let (da, db) = (df(w[0]), df(w[1]));
        if da != 0.0 && db != 0.0 && (da < 0.0) != (db < 0.0) {
            points.push(bisect(df, w[0], w[1]));
        }
        points.push(w[1]);
    }
    points.dedup();

    let mut roots: Vec<f64> = Vec::new();
    let values: Vec<f64> = points.iter().map(|&k| f(k)).collect();
    for i in 0..points.len() {
        if values[i] == 0.0 {
            roots.push(points[i]);
        }
        if i + 1 < points.len()
            && values[i] != 0.0
            && values[i + 1] != 0.0
            && (values[i] < 0.0) != (values[i + 1] < 0.0)
        {
            roots.push(bisect(f, points[i], points[i + 1]));
        }
    }
    roots.sort_by(f64::total_cmp);

    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for k in roots {
        match merged.last_mut() {
            Some(last) if (k - *last).abs() < search.merge_tol => {
                if f(k).abs() < f(*last).abs() {
                    *last = k;
                }
            }
            _ => merged.push(k),
        }
    }

    EquilibriumSet {
        gamma,
        roots: merged
            .into_iter()
            .map(|k| {
                let slope = df(k);
                Equilibrium {
                    k,
                    stability: Stability::from_slope(slope),
                    residual: f(k).abs(),
                    slope,
                }
            })
            .collect(),
    }
}

/// Roots of `β s(k,γ) k^a − k = 0` on `(0, k_max]` with the default search;
/// errors with an anomaly report when the count is neither 1 nor 3.
pub fn find_equilibria(gamma: f64, mp: &ModelParams, k_max: f64) -> Result<EquilibriumSet> {
    if !(k_max > 1.0) {
        return Err(Error::invalid(format!("k_max must exceed 1, got {k_max}")));
    }
    let set = equilibria_with(
        gamma,
        mp,
        &RootSearch {
            k_max,
            ..RootSearch::default()
        },
    );
    set.check()?;
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationDiagram {
    pub gamma_grid: Vec<f64>,
    pub branches: Vec<EquilibriumSet>,
    pub gamma_c: f64,
    /// Grid points whose root count was neither 1 nor 3.
    pub anomalies: Vec<Error>,
}

impl BifurcationDiagram {
    /// Branch label of root `index` within a set of `count` roots: `0` for a
    /// lone root, `-1, 0, 1` from lowest to highest for three roots, and the
    /// plain index otherwise.
    pub fn branch_id(count: usize, index: usize) -> i64 {
        match count {
            1 => 0,
            3 => index as i64 - 1,
            _ => index as i64,
        }
    }

    /// Largest jump of a branch between neighbouring grid points that have
    /// the same root count.
    pub fn max_branch_jump(&self) -> f64 {
        self.branches
            .windows(2)
            .filter(|w| w[0].count() == w[1].count())
            .flat_map(|w| {
                w[0].roots
                    .iter()
                    .zip(&w[1].roots)
                    .map(|(a, b)| (a.k - b.k).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Equilibria over an increasing γ grid plus the analytic critical value.
pub fn bifurcation_diagram(gamma_grid: &[f64], mp: &ModelParams) -> Result<BifurcationDiagram> {
    bifurcation_diagram_with(gamma_grid, mp, &RootSearch::default())
}

pub fn bifurcation_diagram_with(
    gamma_grid: &[f64],
    mp: &ModelParams,
    search: &RootSearch,
) -> Result<BifurcationDiagram> {
    if gamma_grid.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    if gamma_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("gamma grid must be strictly increasing"));
    }
    let gamma_c = critical_gamma(mp.savings.psi(), mp.production.a)?;
    let branches: Vec<EquilibriumSet> = gamma_grid
        .iter()
        .map(|&g| equilibria_with(g, mp, search))
        .collect();
    let anomalies = branches.iter().filter_map(|s| s.check().err()).collect();
    Ok(BifurcationDiagram {
        gamma_grid: gamma_grid.to_vec(),
        branches,
        gamma_c,
        anomalies,
    })
}

/// `(k, dk/dt)` samples of the deterministic drift.
pub fn phase_line(gamma: f64, mp: &ModelParams, k_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(&bad) = k_grid.iter().find(|&&k| !(k > 0.0)) {
        return Err(Error::invalid(format!(
            "phase line grid must be positive, got {bad}"
        )));
    }
    let mp = mp.with_gamma(gamma);
    Ok(k_grid
        .iter()
        .map(|&k| (k, rhs_deterministic(k, &mp)))
        .collect())
}

/// Number of sign changes in a sampled phase line (exact zeros skipped).
pub fn sign_changes(samples: &[(f64, f64)]) -> usize {
    let signs: Vec<bool> = samples
        .iter()
        .filter(|s| s.1 != 0.0)
        .map(|s| s.1 > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
