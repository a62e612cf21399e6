//! Numerics for strongly competing Lotka-Volterra systems on domains made of
//! balls joined by thin corridors: scalar and coupled Newton solvers,
//! continuation in the competition strength, and segregation diagnostics.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// mirror the per-node k×k kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod discrete_ops;
pub mod error;
pub mod grid_domain;
pub mod reaction;
pub mod scalar_solver;
pub mod sparse;
pub mod state;
pub mod system_solver;

pub use error::{Error, Result};
