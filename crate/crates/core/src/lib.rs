//! Quadratic penalty methods with partial minimization over the state
//! variable, for problems of the form `min f(u, y) s.t. A(u) y = q(u)`.
//!
//! The inner problem `min_y f(u, y) + (λ/2)‖A(u)y − q(u)‖²` is solved by
//! conjugate gradients (or Newton–CG when `f` is not quadratic), and outer
//! solvers act on the reduced function of `u` alone.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod error;
pub mod linalg;
pub mod par;
pub mod penalty;
pub mod problems;
pub mod solvers;

pub use error::{Error, Result};
pub use penalty::{PenaltyModel, PenaltyProblem};
