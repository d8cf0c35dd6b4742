//! Small closed-form instances used for oracles and tests.

use crate::linalg::SparseMatrix;
use crate::penalty::{PenaltyModel, SecondOrder};
use nalgebra::DMatrix;
use std::borrow::Cow;

/// `A(u) = u`, `q = 1`, `f(y) = ½y²` with scalar `u` and `y`.
///
/// `φ̃(u) = (λ/2)/(1 + λu²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarToy;

impl ScalarToy {
    pub fn reduced_value(lambda: f64, u: f64) -> f64 {
        0.5 * lambda / (1.0 + lambda * u * u)
    }

    pub fn reduced_gradient(lambda: f64, u: f64) -> f64 {
        let s = 1.0 + lambda * u * u;
        -lambda * lambda * u / (s * s)
    }

    pub fn reduced_hessian(lambda: f64, u: f64) -> f64 {
        let s = 1.0 + lambda * u * u;
        lambda * lambda * (3.0 * lambda * u * u - 1.0) / (s * s * s)
    }

    /// Gauss–Newton curvature `λy_u²/(1 + λu²)`.
    pub fn gauss_newton(lambda: f64, u: f64) -> f64 {
        let s = 1.0 + lambda * u * u;
        let y = lambda * u / s;
        lambda * y * y / s
    }
}

impl PenaltyModel for ScalarToy {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn constraint_matrix(&self, u: &[f64]) -> Cow<'_, SparseMatrix> {
        Cow::Owned(SparseMatrix::diagonal(&[u[0]]))
    }
    fn rhs(&self, _u: &[f64]) -> Vec<f64> {
        vec![1.0]
    }
    fn jacobian_apply(&self, _u: &[f64], y: &[f64], du: &[f64], out: &mut [f64]) {
        out[0] = y[0] * du[0];
    }
    fn jacobian_transpose_apply(&self, _u: &[f64], y: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = y[0] * w[0];
    }
    fn value(&self, _u: &[f64], y: &[f64]) -> f64 {
        0.5 * y[0] * y[0]
    }
    fn grad_y(&self, _u: &[f64], y: &[f64]) -> Vec<f64> {
        vec![y[0]]
    }
    fn hess_y_apply(&self, _u: &[f64], _y: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = v[0];
    }
    fn quadratic_in_y(&self) -> bool {
        true
    }
    fn lipschitz_f(&self) -> f64 {
        1.0
    }
    fn second_order(&self, _u: &[f64], _y: &[f64], w: &[f64]) -> Option<SecondOrder> {
        Some(SecondOrder {
            h_uu: DMatrix::zeros(1, 1),
            h_yu: DMatrix::zeros(1, 1),
            r_uu: DMatrix::zeros(1, 1),
            k_yu: DMatrix::from_element(1, 1, w[0]),
        })
    }
}

/// `A(u) = diag(u)`, fixed `q`, `f ≡ 0`.
#[derive(Debug, Clone)]
pub struct DiagToy {
    q: Vec<f64>,
}

impl DiagToy {
    pub fn new(q: Vec<f64>) -> Self {
        Self { q }
    }
}

impl PenaltyModel for DiagToy {
    fn state_dim(&self) -> usize {
        self.q.len()
    }
    fn control_dim(&self) -> usize {
        self.q.len()
    }
    fn constraint_matrix(&self, u: &[f64]) -> Cow<'_, SparseMatrix> {
        Cow::Owned(SparseMatrix::diagonal(u))
    }
    fn rhs(&self, _u: &[f64]) -> Vec<f64> {
        self.q.clone()
    }
    fn jacobian_apply(&self, _u: &[f64], y: &[f64], du: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = y[i] * du[i];
        }
    }
    fn jacobian_transpose_apply(&self, _u: &[f64], y: &[f64], w: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = y[i] * w[i];
        }
    }
    fn value(&self, _u: &[f64], _y: &[f64]) -> f64 {
        0.0
    }
    fn grad_y(&self, _u: &[f64], y: &[f64]) -> Vec<f64> {
        vec![0.0; y.len()]
    }
    fn hess_y_apply(&self, _u: &[f64], _y: &[f64], _v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn quadratic_in_y(&self) -> bool {
        true
    }
    fn lipschitz_f(&self) -> f64 {
        0.0
    }
    fn second_order(&self, _u: &[f64], _y: &[f64], w: &[f64]) -> Option<SecondOrder> {
        let n = self.q.len();
        Some(SecondOrder {
            h_uu: DMatrix::zeros(n, n),
            h_yu: DMatrix::zeros(n, n),
            r_uu: DMatrix::zeros(n, n),
            k_yu: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(w)),
        })
    }
}

/// Fixed `A`, fixed `q`, `f(y) = ½‖y − target‖²`, and no control variable.
#[derive(Debug, Clone)]
pub struct FixedQuadratic {
    a: SparseMatrix,
    q: Vec<f64>,
    target: Vec<f64>,
}

impl FixedQuadratic {
    pub fn new(a: SparseMatrix, q: Vec<f64>, target: Vec<f64>) -> Self {
        assert_eq!(a.n_rows(), a.n_cols());
        assert_eq!(a.n_rows(), q.len());
        assert_eq!(q.len(), target.len());
        Self { a, q, target }
    }

    /// `A = I`, `target = 0`.
    pub fn identity(q: Vec<f64>) -> Self {
        let n = q.len();
        Self::new(SparseMatrix::identity(n), q, vec![0.0; n])
    }
}

impl PenaltyModel for FixedQuadratic {
    fn state_dim(&self) -> usize {
        self.q.len()
    }
    fn control_dim(&self) -> usize {
        0
    }
    fn constraint_matrix(&self, _u: &[f64]) -> Cow<'_, SparseMatrix> {
        Cow::Borrowed(&self.a)
    }
    fn constraint_is_constant(&self) -> bool {
        true
    }
    fn rhs(&self, _u: &[f64]) -> Vec<f64> {
        self.q.clone()
    }
    fn jacobian_apply(&self, _u: &[f64], _y: &[f64], _du: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jacobian_transpose_apply(&self, _u: &[f64], _y: &[f64], _w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn value(&self, _u: &[f64], y: &[f64]) -> f64 {
        0.5 * y
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }
    fn grad_y(&self, _u: &[f64], y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.target).map(|(a, b)| a - b).collect()
    }
    fn hess_y_apply(&self, _u: &[f64], _y: &[f64], v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }
    fn quadratic_in_y(&self) -> bool {
        true
    }
    fn lipschitz_f(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_closed_forms_at_unit_point() {
        assert_eq!(ScalarToy::reduced_value(1.0, 1.0), 0.25);
        assert_eq!(ScalarToy::reduced_gradient(1.0, 1.0), -0.25);
        assert_eq!(ScalarToy::reduced_hessian(1.0, 1.0), 0.25);
        assert_eq!(ScalarToy::gauss_newton(1.0, 1.0), 0.125);
    }

    #[test]
    fn scalar_closed_form_agrees_with_brute_force_minimization() {
        let (lam, u) = (3.0, 0.4);
        let phi = |y: f64| 0.5 * y * y + 0.5 * lam * (u * y - 1.0).powi(2);
        let best = (0..=200_000)
            .map(|i| phi(-1.0 + 4.0 * i as f64 / 200_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((best - ScalarToy::reduced_value(lam, u)).abs() < 1e-8);
    }
}
