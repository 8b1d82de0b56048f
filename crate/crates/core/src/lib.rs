//! Numerical laboratory for one-dimensional KPP reaction-diffusion fronts
//! in periodic and close-to-periodic media.
//!
//! The crate is split along the natural pipeline:
//!
//! * [`coefficients`]: periodic fields and reaction terms `f(x, u)`.
//! * [`floquet`]: principal eigenvalues `mu(lambda)` of the drifted periodic
//!   operator, the dispersion curve, the minimal speed `c*` and decay rates.
//! * [`solver`]: a monotone IMEX theta-scheme for `u_t = u_xx + f(x, u)` and
//!   the maximal stationary state.
//! * [`fronts`]: pulsating travelling waves extracted from long Cauchy runs.
//! * [`diagnostics`]: level crossings, speeds, log-shift fits, steepness.
//! * [`experiments`]: end-to-end scenarios returning pass/fail reports.

// `!(x > 0.0)` is deliberate: it rejects NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod floquet;
pub mod fronts;
pub mod linalg;
pub mod optimize;
pub mod solver;

pub use error::{KppError, Result};
