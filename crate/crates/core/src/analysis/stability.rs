//! Linear stability of the three-equation system and the summary report.

use serde::Serialize;

use crate::analysis::equilibria::{critical_gamma, stability_r};
use crate::analysis::lyapunov::LyapunovEstimate;
use crate::models::{
    savings, savings_deriv, threshold_xi, Component, ModelParams, StateVec, Variant,
};
use crate::{Error, Result};

/// Diagonal entries of the three-equation Jacobian at `state`, which are
/// also its eigenvalues: `∂k[s f − ρk]`, `β_inv k − (v + γ)`, `−η_a`.
pub fn jacobian_eigs(state: &StateVec, mp: &ModelParams) -> Result<[f64; 3]> {
    if state.variant() != Variant::ThreeEq {
        return Err(Error::invalid("jacobian_eigs needs a three_eq state"));
    }
    let k = state.get(Component::K).unwrap_or(f64::NAN);
    if !(k > 0.0) {
        return Err(Error::invalid(format!(
            "jacobian_eigs needs k > 0, got {k}"
        )));
    }
    let a = mp.production.a;
    let b = mp.production.b;
    let ka = k.powf(a);
    let dk =
        savings_deriv(k, &mp.savings) * b * ka + savings(k, &mp.savings) * b * a * ka / k - mp.rho;
    Ok([dk, mp.beta_inv * k - (mp.v + mp.attrition()), -mp.eta_a])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XiRegime {
    /// `ξ > 1`: expected to settle around the balanced path.
    Stable,
    /// `ξ < 1`: persistent excursions expected.
    Unstable,
    Marginal,
}

impl XiRegime {
    pub fn of(xi: f64) -> Self {
        if xi > 1.0 {
            XiRegime::Stable
        } else if xi < 1.0 {
            XiRegime::Unstable
        } else {
            XiRegime::Marginal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub gamma_grid: Vec<f64>,
    pub r_of_gamma: Vec<f64>,
    pub gamma_c: f64,
    pub jacobian_eigs: [f64; 3],
    pub xi: f64,
    pub xi_regime: XiRegime,
    pub lyapunov: Option<LyapunovEstimate>,
}

/// Collects `r(γ)` on `gamma_grid`, the critical steepness, the Jacobian
/// spectrum at `state` and the threshold `ξ`. The ξ regime is reported as
/// given, not checked against the spectrum.
pub fn stability_report(
    mp: &ModelParams,
    state: &StateVec,
    gamma_grid: &[f64],
    lyapunov: Option<LyapunovEstimate>,
) -> Result<StabilityReport> {
    let psi = mp.savings.psi();
    let a = mp.production.a;
    let xi = threshold_xi(mp);
    Ok(StabilityReport {
        gamma_grid: gamma_grid.to_vec(),
        r_of_gamma: gamma_grid.iter().map(|&g| stability_r(g, psi, a)).collect(),
        gamma_c: critical_gamma(psi, a)?,
        jacobian_eigs: jacobian_eigs(state, mp)?,
        xi,
        xi_regime: XiRegime::of(xi),
        lyapunov,
    })
}
