//! Explicit central-difference time integration for full-order, Galerkin-reduced
//! and hyper-reduced linear structural dynamics models, together with the
//! critical time step and eigenvalue interlacing machinery that governs their
//! stability.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense kernels (symmetric eigenproblems, SVD, mass
//!   orthonormalization, pseudoinverse, non-negative least squares, spectral radius).
//! - [`model`]: lumped-mass full-order models assembled from element blocks,
//!   including the uniform string with stiff boundary springs.
//! - [`integrator`]: the staggered central-difference scheme, amplification
//!   matrices and their stability assessment.
//! - [`reduction`]: POD and modal bases, Galerkin reduced-order models.
//! - [`hyper`]: collocation, DEIM, GNAT and ECSW hyper-reduction.
//! - [`stability`]: critical time steps, element bounds, interlacing checks.
//! - [`verify`] and [`reproduce`]: randomized property suites and the worked
//!   string examples, both used by the `romstab` binary.
//!
//! ```
//! use romstab::model::{build_string_model, StringParams};
//! use romstab::stability::fom_report;
//!
//! let model = build_string_model(&StringParams::new(5, 1.0, 10.0)).unwrap();
//! let report = fom_report(&model).unwrap();
//! assert!((report.dt_crit - 2.0 / 2000.101f64.sqrt()).abs() < 1e-5);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hyper;
pub mod instances;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod reduction;
pub mod reproduce;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
