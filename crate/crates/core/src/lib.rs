//! Simulation and analysis toolkit for a Solow growth model with a sigmoid
//! savings rate, driven by Gaussian, compound-Poisson and α-stable noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`noise`]: seedable increment generation keyed by [`noise::StreamId`].
//! - [`models`]: savings, production and drift functions for each model variant.
//! - [`sde`]: Euler–Maruyama time stepping with jump augmentation.
//! - [`analysis`]: equilibria, bifurcation diagrams, potentials, Lyapunov
//!   exponents and the slow–fast reduction error.
//! - [`ensemble`]: Monte Carlo orchestration over many paths.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensemble;
mod error;
pub mod models;
pub mod noise;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
