use crate::error::{Error, Result};
use crate::linalg::{cg_solve, norm, power_norm_with, NormalOperator};
use crate::par::{map_slice, Execution};
use crate::penalty::{
    eval_inner, reduced_value_and_gradient, solve_constraint, tight_tolerance, InnerSolveResult,
    PenaltyModel, PenaltyProblem,
};

/// Applies the Gauss–Newton part of `∇²φ̃(u)`, `λGᵀ(I − λA_uφ_yy⁻¹A_uᵀ)G`, to `v`.
///
/// Evaluated in the equivalent form `λGᵀA_uφ_yy⁻¹∇²f A_u⁻¹G v`; the direct form
/// subtracts two quantities of size `λ‖G‖²` whose difference is `O(1)`.
pub fn gauss_newton_apply(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    r: &InnerSolveResult,
    v: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let model = p.model();
    let n = p.state_dim();
    let y = &r.y;
    let a = model.constraint_matrix(u);
    let mut gv = vec![0.0; n];
    model.jacobian_apply(u, y, v, &mut gv);
    let z = solve_constraint(&a, &gv)?;
    let mut t = vec![0.0; n];
    model.hess_y_apply(u, y, &z, &mut t);
    if norm(&t) == 0.0 {
        out.fill(0.0);
        return Ok(());
    }
    let phi = NormalOperator::with_symmetric_part(&*a, p.lambda(), |x: &[f64], o: &mut [f64]| {
        model.hess_y_apply(u, y, x, o)
    });
    let sol = cg_solve(&phi, &t, 1e-12, (20 * n).max(2000))?;
    let aw = a.spmv(&sol.x)?;
    model.jacobian_transpose_apply(u, y, &aw, out);
    out.iter_mut().for_each(|o| *o *= p.lambda());
    Ok(())
}

/// Largest eigenvalue of the Gauss–Newton reduced Hessian at `u`, by power iteration.
pub fn estimate_lipschitz(p: &PenaltyProblem<'_>, u: &[f64], iters: usize, seed: u64) -> Result<f64> {
    p.check_control(u)?;
    if p.control_dim() == 0 {
        return Err(Error::InvalidParameter("problem has no control variable".into()));
    }
    let r = eval_inner(p, u, tight_tolerance(p, u), None)?;
    let est = power_norm_with(
        p.control_dim(),
        |v: &[f64], out: &mut [f64]| gauss_newton_apply(p, u, &r, v, out),
        iters,
        seed,
    )?;
    Ok(est.max(0.0))
}

/// [`estimate_lipschitz`] at each λ, one independent job per entry.
pub fn lipschitz_curve(
    model: &dyn PenaltyModel,
    lambdas: &[f64],
    u: &[f64],
    iters: usize,
    seed: u64,
    exec: Execution,
) -> Vec<Result<f64>> {
    map_slice(exec, lambdas, |&lam| {
        let p = PenaltyProblem::new(model, lam)?;
        estimate_lipschitz(&p, u, iters, seed)
    })
}

/// `c = 10⁻²‖∇H(u₀)‖`, the default schedule constant.
pub fn default_schedule_constant(p: &PenaltyProblem<'_>, u0: &[f64]) -> Result<f64> {
    let (_, g, _) = reduced_value_and_gradient(p, u0, tight_tolerance(p, u0), None)?;
    Ok(1e-2 * norm(&g))
}
