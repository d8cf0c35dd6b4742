//! Finite-difference oracles for reduced gradients and Hessians.

use crate::error::Result;
use crate::par::{map_indices, Execution};
use crate::penalty::{eval_inner, reduced_gradient, reduced_objective, PenaltyProblem};
use nalgebra::DMatrix;

/// Reduced objective with a fresh inner solve at tolerance `tol`.
pub fn reduced_value(p: &PenaltyProblem<'_>, u: &[f64], tol: f64) -> Result<f64> {
    let r = eval_inner(p, u, tol, None)?;
    Ok(reduced_objective(p, u, &r))
}

/// Reduced gradient with a fresh inner solve at tolerance `tol`.
pub fn reduced_grad(p: &PenaltyProblem<'_>, u: &[f64], tol: f64) -> Result<Vec<f64>> {
    let r = eval_inner(p, u, tol, None)?;
    reduced_gradient(p, u, &r)
}

fn shifted(u: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    v[i] += h;
    v
}

/// Central differences of the reduced objective, one coordinate per work item.
pub fn fd_gradient(p: &PenaltyProblem<'_>, u: &[f64], h: f64, tol: f64, exec: Execution) -> Result<Vec<f64>> {
    map_indices(exec, u.len(), |i| {
        let fp = reduced_value(p, &shifted(u, i, h), tol)?;
        let fm = reduced_value(p, &shifted(u, i, -h), tol)?;
        Ok((fp - fm) / (2.0 * h))
    })
    .into_iter()
    .collect()
}

/// Central differences of the reduced gradient, symmetrized.
pub fn fd_hessian(p: &PenaltyProblem<'_>, u: &[f64], h: f64, tol: f64, exec: Execution) -> Result<DMatrix<f64>> {
    let d = u.len();
    let cols: Vec<Vec<f64>> = map_indices(exec, d, |i| -> Result<Vec<f64>> {
        let gp = reduced_grad(p, &shifted(u, i, h), tol)?;
        let gm = reduced_grad(p, &shifted(u, i, -h), tol)?;
        Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let m = DMatrix::from_fn(d, d, |r, c| cols[c][r]);
    Ok((&m + m.transpose()) * 0.5)
}
