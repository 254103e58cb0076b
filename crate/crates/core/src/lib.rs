//! Least-squares concave regression.
//!
//! Given samples `(z_i, y_i)` with positive weights `w_i`, find the concave
//! fit closest to `y` in the weighted norm: the projection of `y` onto the
//! polyhedral cone of sequences with nonpositive discrete second differences.
//!
//! The crate provides iterative (asymptotically convergent) solvers, exact
//! active-set solvers, a greedy feasible warm start and a benchmark harness.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod bench;
pub mod cone;
pub mod error;
pub mod finite;
pub mod kernels;
pub mod signal;
pub mod solver;
pub mod trace;
pub mod warmstart;

pub use cone::{build_cone_system, ConeSystem, KktCertificate, RowScaling};
pub use error::{Error, Result};
pub use signal::Signal;
pub use solver::SolverId;
