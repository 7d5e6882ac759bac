//! Filtering, likelihood and drift estimation for mixed fractional Brownian motion
//! `X = B + B^H`.
//!
//! Modules, bottom-up:
//! - [`fractional_kernels`]: constants, covariances, singular kernels, the K/Q operators.
//! - [`ie_solver`]: product-integration Nyström solver for the kernel family g(s,t) and
//!   its derived fields.
//! - [`gaussian_paths`]: exact path simulation and variation diagnostics.
//! - [`filtering`]: the fundamental martingale, innovation, densities and the discrete oracle.
//! - [`estimation`]: drift MLE and the Monte Carlo harness.
//! - [`cli`]: batch front end used by the `mfbm` binary.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod filtering;
pub mod fractional_kernels;
pub mod gaussian_paths;
pub mod ie_solver;
pub mod linalg;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use fractional_kernels::HurstParams;
pub use ie_solver::{Grid, KernelFamily};

