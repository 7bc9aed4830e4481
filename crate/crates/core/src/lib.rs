//! Numerical stationary scattering theory on manifolds with ends.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: end charts, effective potentials, phases, flows and the
//!   numerical condition audit;
//! * [`modes`]: angular bases and the half-density mode representation;
//! * [`solver`]: per-mode resolvent solves with radiation closures, Besov norms
//!   and residual diagnostics;
//! * [`fourier`]: distorted Fourier transforms and generalized eigenfunctions;
//! * [`smatrix`]: scattering matrices and the one-dimensional benchmark;
//! * [`counterexample`]: the parabolic end where plain WKB asymptotics fail;
//! * [`config`] and [`experiment`]: file formats and the task runner used by
//!   the command-line tool.

// NaN-rejecting `!(x > 0.0)` guards and index loops over coupled arrays are
// used on purpose in the numerical kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod config;
pub mod counterexample;
pub mod error;
pub mod experiment;
pub mod fourier;
pub mod geometry;
pub mod linalg;
pub mod modes;
pub mod numerics;
pub mod smatrix;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
