use super::inner::InnerSolveResult;
use super::model::PenaltyProblem;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Largest state dimension [`reduced_hessian_dense`] will assemble.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Dense `∇²φ̃(u)`: the Schur complement `φ_uu − φ_uyφ_yy⁻¹φ_yu` at `(u, y_u)`.
pub fn reduced_hessian_dense(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    r: &InnerSolveResult,
) -> Result<DMatrix<f64>> {
    reduced_hessian_dense_capped(p, u, r, DEFAULT_DENSE_CAP)
}

pub fn reduced_hessian_dense_capped(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    r: &InnerSolveResult,
    cap: usize,
) -> Result<DMatrix<f64>> {
    p.check_control(u)?;
    let n = p.state_dim();
    let d = p.control_dim();
    if n > cap {
        return Err(Error::TooLarge { dim: n, cap });
    }
    if !r.converged {
        return Err(Error::UnconvergedInput);
    }
    let model = p.model();
    let lam = p.lambda();
    let y = &r.y;
    let so = model
        .second_order(u, y, &r.residual)
        .ok_or(Error::MissingSecondOrder)?;

    let mut g = DMatrix::zeros(n, d);
    let mut e = vec![0.0; d];
    let mut col = vec![0.0; n];
    for j in 0..d {
        e[j] = 1.0;
        model.jacobian_apply(u, y, &e, &mut col);
        g.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let a = model.constraint_matrix(u).to_dense();

    let mut hf = DMatrix::zeros(n, n);
    let mut en = vec![0.0; n];
    for j in 0..n {
        en[j] = 1.0;
        model.hess_y_apply(u, y, &en, &mut col);
        hf.column_mut(j).copy_from_slice(&col);
        en[j] = 0.0;
    }
    let phi_yy = &hf + a.transpose() * &a * lam;
    let chol = phi_yy.cholesky().ok_or(Error::Singular)?;

    // With φ_yu = λAᵀG + E, the Gauss-Newton part λGᵀ(I − λAφ_yy⁻¹Aᵀ)G is
    // evaluated as λGᵀAφ_yy⁻¹∇²f A⁻¹G, which avoids cancelling two O(λ) terms.
    let z = a.clone().lu().solve(&g).ok_or(Error::Singular)?;
    let atg = a.transpose() * &g;
    let p_mat = chol.solve(&(&hf * z));
    let gn = atg.transpose() * p_mat * lam;
    let e_mat = &so.h_yu + &so.k_yu * lam;
    let q_mat = chol.solve(&e_mat);
    let cross = atg.transpose() * &q_mat * lam;
    let s = &so.h_uu + &so.r_uu * lam + gn - &cross - cross.transpose() - e_mat.transpose() * q_mat;
    Ok((&s + s.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::eval_inner;
    use crate::problems::toy::{DiagToy, ScalarToy};

    #[test]
    fn scalar_toy_second_derivative() {
        let m = ScalarToy;
        let p = PenaltyProblem::new(&m, 1.0).unwrap();
        let r = eval_inner(&p, &[1.0], 1e-14, None).unwrap();
        let h = reduced_hessian_dense(&p, &[1.0], &r).unwrap();
        assert!((h[(0, 0)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn vanishes_for_square_feasible_problem() {
        let m = DiagToy::new(vec![1.5, -2.0, 3.0]);
        let u = [1.5, -2.0, 3.0];
        let p = PenaltyProblem::new(&m, 10.0).unwrap();
        let r = eval_inner(&p, &u, 1e-13, None).unwrap();
        let h = reduced_hessian_dense(&p, &u, &r).unwrap();
        assert!(h.amax() < 1e-9, "{h}");
    }

    #[test]
    fn cap_is_enforced() {
        let m = ScalarToy;
        let p = PenaltyProblem::new(&m, 1.0).unwrap();
        let r = eval_inner(&p, &[1.0], 1e-12, None).unwrap();
        assert!(matches!(
            reduced_hessian_dense_capped(&p, &[1.0], &r, 0),
            Err(Error::TooLarge { .. })
        ));
    }
}
