//! Straight-line path following for magnetic helical microswimmers.
//!
//! The swimmer is driven by a rotating magnetic field whose rotation rate is
//! capped by the step-out frequency. This crate provides:
//!
//! - [`model`]: helix geometry, drag-derived coefficients, the planar plant
//!   `ṗ = e11·u + d_μ` and the gravity-compensating feedforward.
//! - [`guidance`]: path-frame transforms, the integral line-of-sight (ILOS)
//!   reference field with its integral state, and Lyapunov-based stability
//!   certification of the cross-track error system.
//! - [`controller`]: the pointwise optimal controller, posed as a
//!   trust-region subproblem over the step-out disk and solved by bisection,
//!   by a quartic in the shifted multiplier, or in closed form.
//! - [`sim`]: deterministic RK4 closed-loop simulation, disturbance
//!   calibration, metrics and parameter sweeps.
//! - [`cli`]: scenario files, CSV traces, run manifests, SVG plots and the
//!   command implementations behind the `helix-ilos` binary.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller;
pub mod error;
pub mod guidance;
pub mod model;
pub mod sim;

pub use error::{Error, Result};

/// Planar vector in the ê_x–ê_z plane.
pub type Vec2 = nalgebra::Vector2<f64>;

/// 2×2 real matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;
