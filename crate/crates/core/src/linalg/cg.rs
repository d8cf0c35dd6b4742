use super::{axpy, dot, norm, LinearOperator};
use crate::error::{Error, Result};

/// Stopping rule for [`cg_solve_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CgStop {
    /// `‖r‖ ≤ tol·‖b‖`
    Relative(f64),
    /// `‖r‖ ≤ tol`
    Absolute(f64),
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the recursively updated residual at exit.
    pub residual_norm: f64,
}

/// Conjugate gradient for SPD systems with relative stopping `‖op(x) − b‖ ≤ tol·‖b‖`.
pub fn cg_solve<O: LinearOperator + ?Sized>(
    op: &O,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    cg_solve_with(op, b, None, CgStop::Relative(tol), max_iter)
}

/// Hestenes–Stiefel CG with an optional starting point.
pub fn cg_solve_with<O: LinearOperator + ?Sized>(
    op: &O,
    b: &[f64],
    x0: Option<&[f64]>,
    stop: CgStop,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = op.dim_in();
    if op.dim_out() != n {
        return Err(Error::dim("cg_solve (square operator)", n, op.dim_out()));
    }
    if b.len() != n {
        return Err(Error::dim("cg_solve rhs", n, b.len()));
    }
    let b_norm = norm(b);
    let threshold = match stop {
        CgStop::Relative(t) | CgStop::Absolute(t) if !(t > 0.0) => {
            return Err(Error::InvalidParameter(format!("cg tolerance must be positive, got {t}")))
        }
        CgStop::Relative(t) => t * b_norm,
        CgStop::Absolute(t) => t,
    };
    if b_norm == 0.0 && x0.is_none() {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            residual_norm: 0.0,
        });
    }

    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::dim("cg_solve x0", n, x0.len()));
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    let mut ap = vec![0.0; n];
    if x0.is_some() {
        op.apply(&x, &mut ap);
        axpy(-1.0, &ap, &mut r);
    }
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= threshold {
        return Ok(CgSolution {
            x,
            iterations: 0,
            converged: true,
            residual_norm: rr.sqrt(),
        });
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !curvature.is_finite() {
            return Err(Error::Breakdown { iteration: it });
        }
        if curvature <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                iteration: it,
                curvature,
            });
        }
        let alpha = rr / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::Breakdown { iteration: it });
        }
        if rr_new.sqrt() <= threshold {
            return Ok(CgSolution {
                x,
                iterations: it,
                converged: true,
                residual_norm: rr_new.sqrt(),
            });
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Ok(CgSolution {
        x,
        iterations: max_iter,
        converged: false,
        residual_norm: rr.sqrt(),
    })
}
