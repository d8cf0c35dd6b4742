//! Quadratic penalty formulation with partial minimization over the state.
//!
//! For a fixed control `u` the penalized objective is
//! `φ(u, y) = f(u, y) + (λ/2)‖A(u)y − q(u)‖²`; the reduced function is
//! `φ̃(u) = min_y φ(u, y)` and its gradient is `∇_u f + λ G(u, y_u)ᵀ(A(u)y_u − q(u))`.

mod diagnostics;
mod hessian;
mod inner;
mod model;
mod schedule;

pub use diagnostics::{
    condition_number_estimate, constraint_norms, residual_bound_check, sigma_min_estimate, solve_constraint,
    solve_constraint_transpose, ConstraintNorms, ResidualBound,
};
pub use hessian::{reduced_hessian_dense, reduced_hessian_dense_capped, DEFAULT_DENSE_CAP};
pub use inner::{eval_inner, eval_inner_with, InnerOptions, InnerSolveResult};
pub use model::{JacobianOperator, PenaltyModel, PenaltyProblem, SecondOrder};
pub use schedule::{inner_tolerance, InnerTolerance, ScheduleMode, ToleranceSchedule};

use crate::error::{Error, Result};

/// `φ̃(u) = f(u, y_u) + (λ/2)‖A_u y_u − q‖²`, including any control-only terms.
pub fn reduced_objective(p: &PenaltyProblem<'_>, u: &[f64], r: &InnerSolveResult) -> f64 {
    p.model().value(u, &r.y) + 0.5 * p.lambda() * r.residual_norm * r.residual_norm
}

/// `∇φ̃(u) = ∇_u f(u, y_u) + λ G(u, y_u)ᵀ(A_u y_u − q)`.
pub fn reduced_gradient(p: &PenaltyProblem<'_>, u: &[f64], r: &InnerSolveResult) -> Result<Vec<f64>> {
    if !r.converged {
        return Err(Error::UnconvergedInput);
    }
    Ok(p.full_gradient_u(u, &r.y, &r.residual))
}

/// Convenience: one inner solve followed by objective and gradient.
pub fn reduced_value_and_gradient(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    grad_tol: f64,
    y_warm: Option<&[f64]>,
) -> Result<(f64, Vec<f64>, InnerSolveResult)> {
    let r = eval_inner(p, u, grad_tol, y_warm)?;
    let val = reduced_objective(p, u, &r);
    let g = reduced_gradient(p, u, &r)?;
    Ok((val, g, r))
}

/// A tight absolute inner tolerance for diagnostics. It is scaled to the
/// λ-free part of the problem: at the minimizer `λAᵀr = −∇_y f` stays bounded
/// as λ grows, so a λ-proportional tolerance would swamp the residual.
pub fn tight_tolerance(p: &PenaltyProblem<'_>, u: &[f64]) -> f64 {
    let model = p.model();
    let a = model.constraint_matrix(u);
    let atq = a.spmv_transpose(&model.rhs(u)).expect("state dimension");
    let y0 = model.initial_state(u);
    let scale = crate::linalg::norm(&atq) + crate::linalg::norm(&model.grad_y(u, &y0));
    1e-12 * scale.max(1e-3)
}
