//! Mixed shell and dyadic-tree turbulence cascade models.
//!
//! This crate simulates the conservative Galerkin truncations of two energy
//! cascade models — a mixed Novikov/Obukhov shell model on ℤ⁺ and its
//! bounded-branching tree generalization — and verifies the structure that
//! makes them interesting: exact kinetic-energy conservation, an explicit
//! family of invariant product Gaussian measures characterized by a
//! divergence condition on the coefficients, weighted Sobolev norms with
//! closed-form Gaussian moments, and uniform-in-truncation tail behavior.
//!
//! The main entry points:
//!
//! - [`shell::ShellParams`] / [`tree::TreeParams`] — model coefficients and
//!   vector fields, plus the analytic divergence and energy residuals.
//! - [`integrate::integrate`] — adaptive (Dormand–Prince 5(4)) and fixed RK4
//!   integration with dense output and energy-drift monitoring.
//! - [`measures`] — reproducible counter-based Gaussian ensembles,
//!   closed-form moments of the weighted χ² series, and the Monte Carlo
//!   measure-invariance test.
//! - [`norms`] — H^s norms, the interpolation exponent, time-integrated
//!   L^p/W^{1,p} functionals, the H^{0⁻} metric, and integral-form residuals.
//! - [`experiments`] — Galerkin convergence, tail-quantile and necessity
//!   studies.
//! - [`cli`] — the configuration format and the `cascade` binary's commands.
//!
//! Every operation is deterministic: ensembles are keyed by (seed, sample,
//! component), reductions are fixed-shape pairwise sums, and reruns produce
//! byte-identical outputs regardless of thread count. The `examples/`
//! directory contains one runnable walkthrough per capability.

// validation uses `!(x > a)` so NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod integrate;
pub mod measures;
pub mod model;
pub mod norms;
pub mod shell;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use integrate::{energy_drift, integrate, IntegratorConfig, Method, Trajectory};
pub use model::Model;
pub use shell::{energy, ShellParams};
pub use tree::{TreeParams, TreeTopology};
