//! Matrix-gain ("high-dimensional") PID tuning for disturbed nonlinear MIMO plants.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense symmetric linear algebra (Jacobi eigensolver, Cholesky).
//! - [`lmi`]: log-det barrier interior-point solver for single-block linear
//!   matrix inequality problems of the form `min cᵀy  s.t.  G0 + Σ yᵢGᵢ ⪯ 0`.
//! - [`plant`]: the plant interface, the fixed-wing kinematic model and the
//!   bounded sample-and-hold disturbance.
//! - [`controller`]: velocity-form PID law with rate and input saturation.
//! - [`tuner`]: velocity-form error blocks, the two eigenvalue problems that
//!   produce `K = (K_p, K_i)` and its compensation `ΔK`, and the invariant-set
//!   certificates.
//! - [`simulator`]: fixed-step RK4 closed-loop and linear error-system runs.
//! - [`metrics`]: ITAE, peak time, overshoot and A/B comparison reports.

// Input checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod lmi;
pub mod metrics;
pub mod numerics;
pub mod plant;
pub mod simulator;
pub mod tuner;

pub use error::{Error, Result};
