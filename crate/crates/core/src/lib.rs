//! Finite-dimensional linear Koopman surrogate models of nonlinear delay
//! differential equations, learned from trajectory data.
//!
//! A DDE evolves on the infinite-dimensional space of history functions. This
//! crate discretizes histories at M uniform sample points, harvests transition
//! pairs of discretized states from simulated trajectories, and fits a linear
//! surrogate of the induced dynamics by kernel EDMD with compactly supported
//! Wendland kernels. The fitted model predicts in a lifted space of kernel
//! features and reconstructs discretized states by kernel interpolation.
//!
//! Pipeline, by module:
//!
//! * [`dde`] — benchmark systems and a fixed-step RK4 method-of-steps
//!   integrator with cubic Hermite dense output;
//! * [`discretize`] — the sampling operator Q, the piecewise-linear
//!   reconstruction R, and the projection P = R∘Q;
//! * [`kernel`] — Wendland radial basis kernel, Gram factorization and fill
//!   distance;
//! * [`kedmd`] — transition datasets, center selection, local affine
//!   regression, the Koopman matrix A and state-space rollout;
//! * [`experiment`] — the sweep harness producing prediction-error curves and
//!   CSV/plot artifacts.

pub mod dde;
pub mod discretize;
mod error;
pub mod experiment;
pub mod kedmd;
pub mod kernel;

pub mod config;
pub mod csvio;
pub mod plot;

pub use error::{Error, Result};
