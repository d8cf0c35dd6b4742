use crate::error::Result;
use crate::linalg::{power_norm, LinearOperator, NormalOperator};
use crate::penalty::{
    eval_inner, inner_tolerance, reduced_gradient, reduced_objective, sigma_min_estimate,
    InnerSolveResult, InnerTolerance, PenaltyProblem, ToleranceSchedule,
};

/// Function value and gradient at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Vec<f64>,
    pub inner_iterations: usize,
    /// Upper bound on the distance of `grad` from the exact gradient.
    pub gradient_error: Option<f64>,
}

/// A smooth function driven by the outer solvers.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Called once before the evaluations that belong to outer iteration `k`.
    fn begin_iteration(&mut self, _k: usize, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation>;

    /// Part of `x` reported as the control in traces.
    fn control<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        x
    }
}

const G_NORM_ITERS: usize = 30;
const G_NORM_REFRESH: usize = 10;
const SIGMA_ITERS: usize = 20;

/// The reduced function `φ̃(u)`, evaluated by partial minimization.
pub struct ReducedObjective<'a> {
    p: PenaltyProblem<'a>,
    schedule: ToleranceSchedule,
    warm_start: bool,
    seed: u64,
    y: Option<Vec<f64>>,
    g_norm: Option<f64>,
    g_refreshed_at: usize,
    sigma_min: Option<f64>,
    tol: Option<InnerTolerance>,
    last: Option<InnerSolveResult>,
}

impl<'a> ReducedObjective<'a> {
    pub fn new(p: PenaltyProblem<'a>, schedule: ToleranceSchedule, warm_start: bool, seed: u64) -> Self {
        Self {
            p,
            schedule,
            warm_start,
            seed,
            y: None,
            g_norm: None,
            g_refreshed_at: 0,
            sigma_min: None,
            tol: None,
            last: None,
        }
    }

    pub fn problem(&self) -> &PenaltyProblem<'a> {
        &self.p
    }

    /// Tolerance in force for the current outer iteration.
    pub fn tolerance(&self) -> Option<InnerTolerance> {
        self.tol
    }

    pub fn last_inner(&self) -> Option<&InnerSolveResult> {
        self.last.as_ref()
    }

    pub fn g_norm(&self) -> Option<f64> {
        self.g_norm
    }

    pub fn sigma_min(&self) -> Option<f64> {
        self.sigma_min
    }

    fn refresh_sigma(&mut self, u: &[f64]) -> Result<f64> {
        let model = self.p.model();
        match self.sigma_min {
            Some(s) if model.constraint_is_constant() => Ok(s),
            _ => {
                let a = model.constraint_matrix(u);
                let s = sigma_min_estimate(&a, SIGMA_ITERS, self.seed)?;
                self.sigma_min = Some(s);
                Ok(s)
            }
        }
    }

    fn jacobian_norm(&self, u: &[f64], y: &[f64]) -> Result<f64> {
        if self.p.control_dim() == 0 {
            return Ok(1.0);
        }
        let g = self.p.jacobian(u, y);
        let gtg = NormalOperator::new(&g, 1.0);
        debug_assert_eq!(gtg.dim_in(), self.p.control_dim());
        let s = power_norm(&gtg, G_NORM_ITERS, self.seed)?.sqrt();
        Ok(if s > 0.0 { s } else { 1.0 })
    }
}

impl Objective for ReducedObjective<'_> {
    fn dim(&self) -> usize {
        self.p.control_dim()
    }

    fn begin_iteration(&mut self, k: usize, u: &[f64]) -> Result<()> {
        let sigma = self.refresh_sigma(u)?;
        let lam = self.p.lambda();
        let due = self.g_norm.is_none() || k >= self.g_refreshed_at + G_NORM_REFRESH;
        if due {
            if self.y.is_none() {
                // Provisional solve to have a state at which G can be evaluated.
                let t = inner_tolerance(&self.schedule, k, lam, 1.0, sigma);
                let r = eval_inner(&self.p, u, t.grad_tol, None)?;
                self.y = Some(r.y);
            }
            let y = self.y.as_deref().unwrap();
            self.g_norm = Some(self.jacobian_norm(u, y)?);
            self.g_refreshed_at = k;
        }
        self.tol = Some(inner_tolerance(
            &self.schedule,
            k,
            lam,
            self.g_norm.unwrap(),
            sigma,
        ));
        Ok(())
    }

    fn evaluate(&mut self, u: &[f64]) -> Result<Evaluation> {
        if self.tol.is_none() {
            self.begin_iteration(1, u)?;
        }
        let tol = self.tol.unwrap();
        let warm = if self.warm_start { self.y.as_deref() } else { None };
        let r = eval_inner(&self.p, u, tol.grad_tol, warm)?;
        let value = reduced_objective(&self.p, u, &r);
        let grad = reduced_gradient(&self.p, u, &r)?;
        let gradient_error = match (self.p.model().jacobian_is_state_independent(), self.g_norm, self.sigma_min) {
            (true, Some(g), Some(s)) => Some(g * r.grad_norm / s),
            _ => None,
        };
        let inner_iterations = r.iterations;
        self.y = Some(r.y.clone());
        self.last = Some(r);
        Ok(Evaluation {
            value,
            grad,
            inner_iterations,
            gradient_error,
        })
    }
}

/// The penalized objective as a function of the stacked variable `(u, y)`.
pub struct JointObjective<'a> {
    p: PenaltyProblem<'a>,
}

impl<'a> JointObjective<'a> {
    pub fn new(p: PenaltyProblem<'a>) -> Self {
        Self { p }
    }

    pub fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.p.control_dim())
    }
}

impl Objective for JointObjective<'_> {
    fn dim(&self) -> usize {
        self.p.control_dim() + self.p.state_dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation> {
        let (u, y) = self.split(x);
        let r = self.p.residual(u, y);
        let value = self.p.model().value(u, y) + 0.5 * self.p.lambda() * crate::linalg::dot(&r, &r);
        let mut grad = self.p.full_gradient_u(u, y, &r);
        grad.extend(self.p.full_gradient_y(u, y, &r));
        Ok(Evaluation {
            value,
            grad,
            inner_iterations: 0,
            gradient_error: Some(0.0),
        })
    }

    fn control<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[..self.p.control_dim()]
    }
}
