//! Spectral Galerkin simulation of a stochastic two-phase flow: an
//! incompressible Navier–Stokes velocity coupled to an Allen–Cahn order
//! parameter with a logarithmic potential, driven by multiplicative noise.
//!
//! Module map, bottom up:
//!
//! * [`potential`]: the logarithmic potential and its Yosida regularization.
//! * [`spectral`]: Fourier and cosine bases, Leray projection, dealiased
//!   nonlinear terms, norms and the snapshot format.
//! * [`noise`]: truncated Wiener processes with counter-based increments.
//! * [`galerkin`]: the semi-discrete system and the Euler–Maruyama stepper.
//! * [`diagnostics`]: energy ledger, ensemble energy inequality, paired-path
//!   dependence and self-convergence studies.
//! * [`pressure`]: a-posteriori pressure from the unprojected momentum
//!   residual.
//! * [`harness`]: configuration, run directories and the command drivers.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod harness;
pub mod noise;
pub mod potential;
pub mod pressure;
pub mod spectral;

pub use error::{Error, Result};
