//! Accelerated complementary composite minimization.
//!
//! Minimizes `f(x) + psi(x)` where `f` has Hoelder-continuous gradients and
//! `psi` is uniformly convex, both measured in an lp or Schatten-p norm.

pub mod apps;
pub mod cli;
pub mod error;
pub mod gradnorm;
pub mod hardinstance;
pub mod linalg;
pub mod oracles;
pub mod regularizers;
pub mod solver;
pub mod spaces;
pub mod tolerances;
pub mod verification;

pub use error::{Error, Result};
