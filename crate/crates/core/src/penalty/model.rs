use crate::error::{Error, Result};
use crate::linalg::{LinearOperator, SparseMatrix};
use nalgebra::DMatrix;
use std::borrow::Cow;

/// Second-order blocks needed by the dense reduced Hessian.
///
/// With `w` the residual `A_u y − q`:
/// `φ_uu = h_uu + λ(GᵀG + r_uu)` and `φ_yu = h_yu + λ(k_yu + A_uᵀG)`.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    /// `∇²_uu f(u, y)`, d×d.
    pub h_uu: DMatrix<f64>,
    /// `∇_u ∇_y f(u, y)`, n×d.
    pub h_yu: DMatrix<f64>,
    /// `∇_u [G(u, y)ᵀ w]`, d×d.
    pub r_uu: DMatrix<f64>,
    /// `∇_u [A_uᵀ w]`, n×d.
    pub k_yu: DMatrix<f64>,
}

/// A constrained fitting problem `min f(u, y) s.t. A(u) y = q(u)`.
///
/// The state term `f` is convex in `y`. Control-only terms (the `g` part) and
/// any coupling between `u` and `y` are folded into [`value`](Self::value) and
/// [`grad_u`](Self::grad_u).
pub trait PenaltyModel: Send + Sync {
    /// n
    fn state_dim(&self) -> usize;
    /// d
    fn control_dim(&self) -> usize;

    /// `A(u)`, square n×n and invertible for admissible `u`.
    fn constraint_matrix(&self, u: &[f64]) -> Cow<'_, SparseMatrix>;

    /// True when `A` does not depend on `u` (lets callers cache norm estimates).
    fn constraint_is_constant(&self) -> bool {
        false
    }

    /// Right-hand side `q(u)`.
    fn rhs(&self, u: &[f64]) -> Vec<f64>;

    /// `out = G(u, y) du` where `G = ∂(A(u)y − q(u))/∂u`.
    fn jacobian_apply(&self, u: &[f64], y: &[f64], du: &[f64], out: &mut [f64]);

    /// True when `G` depends on neither `u` nor `y` and `∇_u f` does not
    /// depend on `y`; the reduced gradient error is then bounded by
    /// `‖G‖‖A⁻¹‖‖∇_y φ‖`.
    fn jacobian_is_state_independent(&self) -> bool {
        false
    }

    /// `out = G(u, y)ᵀ w`.
    fn jacobian_transpose_apply(&self, u: &[f64], y: &[f64], w: &[f64], out: &mut [f64]);

    /// `f(u, y) + g(u)`.
    fn value(&self, u: &[f64], y: &[f64]) -> f64;

    fn grad_y(&self, u: &[f64], y: &[f64]) -> Vec<f64>;

    /// Partial gradient of [`value`](Self::value) in `u` at fixed `y`.
    fn grad_u(&self, u: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.0; u.len()]
    }

    /// `out = ∇²_yy f(u, y) v`.
    fn hess_y_apply(&self, u: &[f64], y: &[f64], v: &[f64], out: &mut [f64]);

    /// Whether `f(u, ·)` is quadratic, so one linear solve minimizes `φ(u, ·)`.
    fn quadratic_in_y(&self) -> bool;

    /// Lipschitz constant of `∇_y f` (exact for quadratic `f`, an upper bound otherwise).
    fn lipschitz_f(&self) -> f64;

    /// Starting state for iterative inner solves.
    fn initial_state(&self, _u: &[f64]) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    fn second_order(&self, _u: &[f64], _y: &[f64], _w: &[f64]) -> Option<SecondOrder> {
        None
    }
}

/// A model paired with a penalty weight `λ > 0`.
#[derive(Clone, Copy)]
pub struct PenaltyProblem<'m> {
    model: &'m dyn PenaltyModel,
    lambda: f64,
}

impl std::fmt::Debug for PenaltyProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PenaltyProblem")
            .field("n", &self.model.state_dim())
            .field("d", &self.model.control_dim())
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl<'m> PenaltyProblem<'m> {
    pub fn new(model: &'m dyn PenaltyModel, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "penalty weight must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { model, lambda })
    }

    pub fn model(&self) -> &'m dyn PenaltyModel {
        self.model
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.model, lambda)
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.model.control_dim()
    }

    pub(crate) fn check_control(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.control_dim() {
            return Err(Error::dim("control vector", self.control_dim(), u.len()));
        }
        Ok(())
    }

    /// `A(u) y − q(u)`
    pub fn residual(&self, u: &[f64], y: &[f64]) -> Vec<f64> {
        let a = self.model.constraint_matrix(u);
        a.residual(y, &self.model.rhs(u)).expect("state dimension")
    }

    /// Joint objective `F(u, y) = f(u, y) + (λ/2)‖A(u)y − q‖²`.
    pub fn joint_objective(&self, u: &[f64], y: &[f64]) -> f64 {
        let r = self.residual(u, y);
        self.model.value(u, y) + 0.5 * self.lambda * crate::linalg::dot(&r, &r)
    }

    /// `∇_u φ(u, y)` given the residual at `(u, y)`.
    pub fn full_gradient_u(&self, u: &[f64], y: &[f64], residual: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.control_dim()];
        self.model.jacobian_transpose_apply(u, y, residual, &mut g);
        let gu = self.model.grad_u(u, y);
        for (gi, hi) in g.iter_mut().zip(gu) {
            *gi = self.lambda * *gi + hi;
        }
        g
    }

    /// `∇_y φ(u, y)` given the residual at `(u, y)`.
    pub fn full_gradient_y(&self, u: &[f64], y: &[f64], residual: &[f64]) -> Vec<f64> {
        let a = self.model.constraint_matrix(u);
        let mut g = a.spmv_transpose(residual).expect("state dimension");
        for (gi, hi) in g.iter_mut().zip(self.model.grad_y(u, y)) {
            *gi = self.lambda * *gi + hi;
        }
        g
    }

    /// `G(u, y)` as a linear operator (d → n).
    pub fn jacobian<'a>(&'a self, u: &'a [f64], y: &'a [f64]) -> JacobianOperator<'a> {
        JacobianOperator {
            model: self.model,
            u,
            y,
        }
    }
}

/// `G(u, y)` bound to a point.
pub struct JacobianOperator<'a> {
    model: &'a dyn PenaltyModel,
    u: &'a [f64],
    y: &'a [f64],
}

impl LinearOperator for JacobianOperator<'_> {
    fn dim_in(&self) -> usize {
        self.model.control_dim()
    }
    fn dim_out(&self) -> usize {
        self.model.state_dim()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.model.jacobian_apply(self.u, self.y, x, out)
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        self.model.jacobian_transpose_apply(self.u, self.y, w, out)
    }
}
