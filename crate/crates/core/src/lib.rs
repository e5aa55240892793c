//! Solvers for nonlocal obstacle design problems.
//!
//! The crate discretises the fractional Gagliardo energy on uniform grids,
//! computes hard-obstacle and soft-obstacle Poincaré constants, optimises the
//! obstacle under a measure constraint and runs the σ → ∞ and s ↑ 1 limit
//! experiments.
//!
//! Data-parallel loops use rayon behind the default `parallel` feature. All
//! reductions follow a fixed order, so results do not depend on the number of
//! threads.

pub mod config;
pub mod design;
pub mod eigensolver;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod limits;
pub mod par;
pub mod quadrature;
pub mod records;

pub use error::{Error, Result};
