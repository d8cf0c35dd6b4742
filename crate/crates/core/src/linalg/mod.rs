//! Sparse and dense linear algebra used throughout the crate.

mod cg;
mod dense;
mod operator;
mod power;
mod sparse;

pub use cg::{cg_solve, cg_solve_with, CgSolution, CgStop};
pub use dense::{dense_solve, spd_inverse_apply, symmetric_eigenvalues};
pub use operator::{DenseOperator, FnOperator, LinearOperator, NormalOperator};
pub use power::{power_norm, power_norm_with};
pub use sparse::{CooBuilder, SparseMatrix};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}
