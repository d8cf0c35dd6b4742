use super::inner::InnerSolveResult;
use super::model::PenaltyProblem;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, norm, power_norm, power_norm_with, NormalOperator, SparseMatrix};

/// Solves `A x = b` for square `A`: substitution when lower triangular,
/// CG when symmetric positive definite, CG on the normal equations otherwise.
pub fn solve_constraint(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::dim("square constraint matrix", a.n_rows(), a.n_cols()));
    }
    if a.is_lower_triangular() {
        return a.solve_lower(b);
    }
    let n = a.n_rows();
    let max_iter = (50 * n).max(5000);
    let x = if is_symmetric(a) {
        match cg_solve(a, b, 1e-14, max_iter) {
            Ok(sol) => sol.x,
            Err(Error::NotPositiveDefinite { .. }) => normal_solve(a, b, max_iter)?,
            Err(e) => return Err(e),
        }
    } else {
        normal_solve(a, b, max_iter)?
    };
    let mut res = a.spmv(&x)?;
    for (ri, bi) in res.iter_mut().zip(b) {
        *ri -= bi;
    }
    if norm(&res) > 1e-8 * norm(b).max(f64::MIN_POSITIVE) {
        return Err(Error::Singular);
    }
    Ok(x)
}

/// Solves `Aᵀ x = b`.
pub fn solve_constraint_transpose(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.is_lower_triangular() {
        return a.solve_lower_transpose(b);
    }
    if is_symmetric(a) {
        return solve_constraint(a, b);
    }
    solve_constraint(&a.transpose(), b)
}

fn normal_solve(a: &SparseMatrix, b: &[f64], max_iter: usize) -> Result<Vec<f64>> {
    let atb = a.spmv_transpose(b)?;
    let op = NormalOperator::new(a, 1.0);
    Ok(cg_solve(&op, &atb, 1e-15, max_iter)?.x)
}

fn is_symmetric(a: &SparseMatrix) -> bool {
    let t = a.transpose();
    t.row_offsets() == a.row_offsets()
        && t.col_indices() == a.col_indices()
        && t.values()
            .iter()
            .zip(a.values())
            .all(|(x, y)| (x - y).abs() <= 1e-14 * x.abs().max(y.abs()))
}

/// `‖A‖₂` and `‖A⁻¹‖₂` by power iteration on `AᵀA` and on `A⁻¹A⁻ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintNorms {
    pub norm: f64,
    pub inv_norm: f64,
}

impl ConstraintNorms {
    pub fn sigma_min(&self) -> f64 {
        1.0 / self.inv_norm
    }

    pub fn condition(&self) -> f64 {
        self.norm * self.inv_norm
    }
}

pub fn constraint_norms(a: &SparseMatrix, iters: usize, seed: u64) -> Result<ConstraintNorms> {
    let ata = NormalOperator::new(a, 1.0);
    let top = power_norm(&ata, iters, seed)?;
    Ok(ConstraintNorms {
        norm: top.sqrt(),
        inv_norm: inverse_norm(a, iters, seed)?,
    })
}

/// `σ_min(A)` by inverse iteration.
pub fn sigma_min_estimate(a: &SparseMatrix, iters: usize, seed: u64) -> Result<f64> {
    Ok(1.0 / inverse_norm(a, iters, seed)?)
}

fn inverse_norm(a: &SparseMatrix, iters: usize, seed: u64) -> Result<f64> {
    let inv = power_norm_with(
        a.n_cols(),
        |v: &[f64], out: &mut [f64]| {
            let w = solve_constraint_transpose(a, v)?;
            out.copy_from_slice(&solve_constraint(a, &w)?);
            Ok(())
        },
        iters,
        seed,
    )?;
    if !(inv > 0.0) {
        return Err(Error::PowerIteration("inverse iteration produced no growth"));
    }
    Ok(inv.sqrt())
}

/// Outcome of comparing `‖A_u y_u − q‖` with `‖A_u⁻ᵀ∇f(A_u⁻¹q)‖/λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBound {
    pub residual: f64,
    pub bound: f64,
    /// Allowance for the inexact inner solve and for rounding in `A y − q`.
    pub slack: f64,
    pub satisfied: bool,
}

pub fn residual_bound_check(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    r: &InnerSolveResult,
) -> Result<ResidualBound> {
    p.check_control(u)?;
    let a = p.model().constraint_matrix(u);
    let q = p.model().rhs(u);
    let feasible = solve_constraint(&a, &q)?;
    let grad = p.model().grad_y(u, &feasible);
    let w = solve_constraint_transpose(&a, &grad)?;
    let bound = norm(&w) / p.lambda();
    let norms = constraint_norms(&a, 50, 0)?;
    // ‖A(y − y_u)‖ ≤ ‖A H⁻¹‖‖∇_yφ‖ ≤ ‖A⁻¹‖‖∇_yφ‖/λ since H ⪰ λAᵀA.
    let slack = norms.inv_norm * r.grad_norm / p.lambda()
        + 16.0 * f64::EPSILON * (norms.norm * norm(&r.y) + norm(&q));
    Ok(ResidualBound {
        residual: r.residual_norm,
        bound,
        slack,
        satisfied: r.residual_norm <= bound + slack,
    })
}

/// `κ = Lip(f)‖A_u⁻¹‖²/λ + ‖A_u‖²‖A_u⁻¹‖²`.
pub fn condition_number_estimate(p: &PenaltyProblem<'_>, u: &[f64]) -> Result<f64> {
    p.check_control(u)?;
    let a = p.model().constraint_matrix(u);
    let nrm = constraint_norms(&a, 100, 0)?;
    let inv2 = nrm.inv_norm * nrm.inv_norm;
    Ok(p.model().lipschitz_f() * inv2 / p.lambda() + nrm.norm * nrm.norm * inv2)
}
