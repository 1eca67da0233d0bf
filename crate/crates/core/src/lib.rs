//! Online, output-feedback inverse reinforcement learning for linear agents.
//!
//! An agent with double-integrator-structured linear dynamics acts optimally
//! with respect to an unknown quadratic cost. From position and input
//! measurements alone, this crate estimates the agent's state and dynamics
//! (concurrent-learning observer), then recovers the cost weights by least
//! squares on the inverse Bellman error, with condition-number-driven data
//! selection and quality-gated purging of the regression history.
//!
//! Module map:
//!
//! - [`numerics`]: integration, quadrature, Riccati solve, least squares.
//! - [`plant`]: the demonstrator (true dynamics, true cost, optimal policy).
//! - [`estimator`]: simultaneous state and parameter estimation.
//! - [`irl`]: features, inverse Bellman rows, data selection, weight solve.
//! - [`purge`]: quality indicators and the purge/update policy.
//! - [`experiment`]: configuration, end-to-end runner and reporting.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod irl;
pub mod numerics;
pub mod plant;
pub mod purge;

pub use error::{Error, Result};
