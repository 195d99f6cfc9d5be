//! Potential `V(k,γ) = −∫₁ᵏ (β s(u,γ) u^a − u) du` of the deterministic drift.

use crate::models::{rhs_deterministic, ModelParams};
use crate::{Error, Result};

/// Reference point where the potential is zero.
pub const K_REF: f64 = 1.0;

/// Relative tolerance of the quadrature.
pub const QUAD_RTOL: f64 = 1e-9;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance
/// `rtol` (absolute floor `1e-15`). Local Richardson correction is applied.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = (rtol * whole.abs()).max(1e-15);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `V(k, γ)` with `V(1, γ) = 0`.
pub fn potential(k: f64, gamma: f64, mp: &ModelParams) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid(format!("potential needs k > 0, got {k}")));
    }
    let mp = mp.with_gamma(gamma);
    let f = |u: f64| -rhs_deterministic(u, &mp);
    Ok(adaptive_simpson(&f, K_REF, k, QUAD_RTOL))
}

/// Potential on a grid, integrating segment by segment outward from
/// [`K_REF`] so that neighbouring values share their common part.
pub fn potential_profile(k_grid: &[f64], gamma: f64, mp: &ModelParams) -> Result<Vec<f64>> {
    if let Some(&bad) = k_grid.iter().find(|&&k| !(k > 0.0)) {
        return Err(Error::invalid(format!("potential needs k > 0, got {bad}")));
    }
    let mp = mp.with_gamma(gamma);
    let f = |u: f64| -rhs_deterministic(u, &mp);
    let mut order: Vec<usize> = (0..k_grid.len()).collect();
    order.sort_by(|&i, &j| k_grid[i].total_cmp(&k_grid[j]));
    let mut out = vec![0.0; k_grid.len()];

    // upward from K_REF
    let mut acc = 0.0;
    let mut last = K_REF;
    for &i in order.iter().filter(|&&i| k_grid[i] >= K_REF) {
        acc += adaptive_simpson(&f, last, k_grid[i], QUAD_RTOL);
        last = k_grid[i];
        out[i] = acc;
    }
    // downward from K_REF
    let mut acc = 0.0;
    let mut last = K_REF;
    for &i in order.iter().rev().filter(|&&i| k_grid[i] < K_REF) {
        acc += adaptive_simpson(&f, last, k_grid[i], QUAD_RTOL);
        last = k_grid[i];
        out[i] = acc;
    }
    Ok(out)
}
