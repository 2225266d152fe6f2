#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN
//! Explicit finite-volume approximation of scalar conservation laws on the
//! periodic torus driven by compactly supported multiplicative noise,
//!
//! ```text
//! du + div A(u) dt = sum_k g_k(x, u) dβ_k(t),   x ∈ T^N,
//! ```
//!
//! together with the kinetic formulation of the scheme (kinetic face fluxes,
//! numerical entropy fluxes, the entropy dissipation measure) and a
//! diagnostics harness that evaluates the energy balance, weak-BV controls and
//! moment bounds satisfied by the discrete solution.
//!
//! Module map:
//!
//! * [`mesh`]: uniform periodic cartesian grids of the 1- and 2-torus.
//! * [`flux`]: flux functions and monotone two-point numerical fluxes.
//! * [`noise`]: noise modes, cell-averaged coefficients, counter-based Wiener increments.
//! * [`scheme`]: CFL time grids and the split deterministic/stochastic time stepper.
//! * [`kinetic`]: kinetic fluxes, entropy fluxes, dissipation measures, kinetic residuals.
//! * [`diagnostics`]: energy ledgers, weak-BV sums, moment bounds.
//! * [`harness`]: exact solutions, convergence tables, ensembles, coupled refinement.
//! * [`config`]: the serializable run configuration shared by the CLI and the web demo.

pub mod config;
pub mod diagnostics;
mod error;
pub mod flux;
pub mod harness;
pub mod kinetic;
pub mod mesh;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod scheme;

pub use error::{Error, Result};
