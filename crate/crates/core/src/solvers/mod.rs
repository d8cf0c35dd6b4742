//! Outer optimizers over the control `u`.

mod config;
mod gd;
mod lbfgs;
mod line_search;
mod lipschitz;
mod objective;
mod trace;

pub use config::{Method, SolverConfig};
pub use gd::gradient_descent;
pub use lbfgs::{joint_lbfgs, lbfgs, lbfgs_minimize};
pub use line_search::{strong_wolfe, LineSearchOutcome, WolfeParams};
pub use lipschitz::{default_schedule_constant, estimate_lipschitz, gauss_newton_apply, lipschitz_curve};
pub use objective::{Evaluation, JointObjective, Objective, ReducedObjective};
pub use trace::{OuterTrace, Termination, TraceRecord};
