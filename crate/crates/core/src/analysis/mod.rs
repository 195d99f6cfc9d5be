//! Deterministic and stochastic analysis of the model.

pub mod equilibria;
pub mod lyapunov;
pub mod potential;
pub mod slowfast;
pub mod stability;

pub use equilibria::{
    bifurcation_diagram, bifurcation_diagram_with, critical_gamma, equilibria_with,
    find_equilibria, phase_line, sign_changes, stability_r, BifurcationDiagram, Equilibrium,
    EquilibriumSet, RootSearch, Stability,
};
pub use lyapunov::{
    lyapunov_largest, lyapunov_sweep, LyapunovEstimate, LyapunovOptions, SweepPoint,
};
pub use potential::{potential, potential_profile};
pub use slowfast::{slowfast_error, SlowFastOptions, SlowFastRun};
pub use stability::{jacobian_eigs, stability_report, StabilityReport, XiRegime};
