//! Parameter estimation for a forced, damped oscillator observed through its
//! second state component, with least-squares or Huber data misfit.
//!
//! States are stacked as `y = (y^0, …, y^{N−1})` with two components each. The
//! dynamics matrix `G(u)` has identity diagonal blocks and `−G_step(u)` below
//! them, so it is lower triangular and solved by substitution.

use super::loss::LossSpec;
use crate::error::{Error, Result};
use crate::linalg::{CooBuilder, SparseMatrix};
use crate::penalty::{PenaltyModel, PenaltyProblem, SecondOrder};
use crate::solvers::{lbfgs_minimize, Evaluation, Objective, OuterTrace, SolverConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Time discretization and forcing of the oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorModel {
    pub omega: f64,
    pub dt: f64,
    pub n: usize,
    /// `(y₁, y₂)` at the first time point.
    pub initial: [f64; 2],
}

impl Default for OscillatorModel {
    /// 400 points over four forcing periods at `ω = 2`, starting from `(0, 1)`.
    fn default() -> Self {
        Self::over_periods(400, 4.0, 2.0).expect("valid defaults")
    }
}

impl OscillatorModel {
    pub fn new(omega: f64, dt: f64, n: usize, initial: [f64; 2]) -> Result<Self> {
        if !(dt > 0.0) || n < 2 || !omega.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "oscillator needs dt > 0 and N >= 2 (got dt = {dt}, N = {n})"
            )));
        }
        Ok(Self {
            omega,
            dt,
            n,
            initial,
        })
    }

    /// `n` points spread over `periods` forcing periods.
    pub fn over_periods(n: usize, periods: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("forcing frequency must be positive, got {omega}")));
        }
        let horizon = periods * 2.0 * PI / omega;
        Self::new(omega, horizon / n as f64, n, [0.0, 1.0])
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn step_matrix(&self, u: &[f64]) -> [[f64; 2]; 2] {
        let dt = self.dt;
        [[1.0 - 2.0 * dt * u[0] * u[1], -dt * u[0] * u[0]], [dt, 1.0]]
    }

    /// Right-hand side `v`: the initial condition, then `(Δt sin(ω t_{k−1}), 0)`.
    pub fn forcing(&self) -> Vec<f64> {
        let mut v = vec![0.0; 2 * self.n];
        v[..2].copy_from_slice(&self.initial);
        for k in 1..self.n {
            v[2 * k] = self.dt * (self.omega * self.time(k - 1)).sin();
        }
        v
    }

    /// `G(u)` as a sparse matrix.
    pub fn dynamics_matrix(&self, u: &[f64]) -> SparseMatrix {
        let n2 = 2 * self.n;
        let s = self.step_matrix(u);
        let mut b = CooBuilder::with_capacity(n2, n2, 6 * self.n);
        for k in 0..self.n {
            if k > 0 {
                for (i, row) in s.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        b.push(2 * k + i, 2 * (k - 1) + j, -v);
                    }
                }
            }
            b.push(2 * k, 2 * k, 1.0);
            b.push(2 * k + 1, 2 * k + 1, 1.0);
        }
        b.build()
    }

    /// Forward recursion `y = G(u)⁻¹v`.
    pub fn forward(&self, u: &[f64]) -> Vec<f64> {
        let s = self.step_matrix(u);
        let v = self.forcing();
        let mut y = vec![0.0; 2 * self.n];
        y[..2].copy_from_slice(&v[..2]);
        for k in 1..self.n {
            let (p1, p2) = (y[2 * k - 2], y[2 * k - 1]);
            y[2 * k] = s[0][0] * p1 + s[0][1] * p2 + v[2 * k];
            y[2 * k + 1] = s[1][0] * p1 + s[1][1] * p2 + v[2 * k + 1];
        }
        y
    }

    /// Backward recursion `x = G(u)⁻ᵀb`.
    pub fn backward(&self, u: &[f64], b: &[f64]) -> Vec<f64> {
        let s = self.step_matrix(u);
        let mut x = b.to_vec();
        for k in (0..self.n - 1).rev() {
            let (n1, n2) = (x[2 * k + 2], x[2 * k + 3]);
            x[2 * k] += s[0][0] * n1 + s[1][0] * n2;
            x[2 * k + 1] += s[0][1] * n1 + s[1][1] * n2;
        }
        x
    }
}

/// Synthetic observations with Gaussian noise and one-sided outliers.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub y_true: Vec<f64>,
    pub z: Vec<f64>,
    pub outlier_mask: Vec<bool>,
}

pub fn simulate(
    model: &OscillatorModel,
    u_true: [f64; 2],
    sigma: f64,
    outlier_frac: f64,
    outlier_range: (f64, f64),
    seed: u64,
) -> Result<Simulation> {
    if !(0.0..=1.0).contains(&outlier_frac) {
        return Err(Error::InvalidParameter(format!("outlier fraction {outlier_frac} outside [0, 1]")));
    }
    if !(sigma >= 0.0) || !(outlier_range.0 <= outlier_range.1) {
        return Err(Error::InvalidParameter("bad noise parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y_true = model.forward(&u_true);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut z: Vec<f64> = (0..model.n)
        .map(|k| y_true[2 * k + 1] + noise.sample(&mut rng))
        .collect();
    let count = (outlier_frac * model.n as f64).floor() as usize;
    let mut outlier_mask = vec![false; model.n];
    for k in rand::seq::index::sample(&mut rng, model.n, count) {
        outlier_mask[k] = true;
        z[k] += if outlier_range.0 == outlier_range.1 {
            outlier_range.0
        } else {
            rng.random_range(outlier_range.0..outlier_range.1)
        };
    }
    Ok(Simulation {
        y_true,
        z,
        outlier_mask,
    })
}

/// Observation misfit `½ρ(R^{−1/2}(Hy − z))` subject to `G(u)y = v`.
#[derive(Debug, Clone)]
pub struct InferenceProblem {
    model: OscillatorModel,
    z: Vec<f64>,
    variance: Vec<f64>,
    loss: LossSpec,
    v: Vec<f64>,
}

impl InferenceProblem {
    pub fn new(model: OscillatorModel, z: Vec<f64>, variance: Vec<f64>, loss: LossSpec) -> Result<Self> {
        if z.len() != model.n {
            return Err(Error::dim("observations", model.n, z.len()));
        }
        if variance.len() != model.n {
            return Err(Error::dim("observation variances", model.n, variance.len()));
        }
        if variance.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter("observation variances must be positive".into()));
        }
        let v = model.forcing();
        Ok(Self {
            model,
            z,
            variance,
            loss,
            v,
        })
    }

    /// Constant variance `R_k = r` for every observation.
    pub fn with_variance(model: OscillatorModel, z: Vec<f64>, r: f64, loss: LossSpec) -> Result<Self> {
        let n = model.n;
        Self::new(model, z, vec![r; n], loss)
    }

    pub fn model(&self) -> &OscillatorModel {
        &self.model
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn observations(&self) -> &[f64] {
        &self.z
    }

    pub fn with_loss(&self, loss: LossSpec) -> Self {
        Self { loss, ..self.clone() }
    }

    /// Newton inner solves on plain Huber run without the smoothness the
    /// convergence theory assumes.
    pub fn newton_on_nonsmooth(&self) -> bool {
        !self.loss.is_c2()
    }

    /// Penalized formulation at finite `λ`.
    pub fn as_penalty_problem(&self, lambda: f64) -> Result<PenaltyProblem<'_>> {
        if self.newton_on_nonsmooth() {
            log::warn!("inner Newton solve on a loss that is only C1 ({})", self.loss);
        }
        PenaltyProblem::new(self, lambda)
    }

    fn scaled_residual(&self, k: usize, y: &[f64]) -> f64 {
        (y[2 * k + 1] - self.z[k]) / self.variance[k].sqrt()
    }

    /// Exact constrained objective `f(u)` and its gradient by the adjoint method.
    pub fn adjoint_gradient(&self, u: &[f64]) -> Result<(f64, [f64; 2])> {
        self.check_control(u)?;
        let y = self.model.forward(u);
        let value = PenaltyModel::value(self, u, &y);
        let g = self.grad_y(u, &y);
        let mut x = self.model.backward(u, &g);
        x.iter_mut().for_each(|v| *v = -*v);
        let mut grad = [0.0; 2];
        self.jacobian_transpose_apply(u, &y, &x, &mut grad);
        Ok((value, grad))
    }

    /// Constrained objective `f(u) = ½ρ(R^{−1/2}(HG(u)⁻¹v − z))`.
    pub fn constrained_value(&self, u: &[f64]) -> Result<f64> {
        self.check_control(u)?;
        Ok(PenaltyModel::value(self, u, &self.model.forward(u)))
    }

    /// Minimizes the constrained objective with L-BFGS on the adjoint gradient.
    pub fn solve_constrained(&self, u0: &[f64], cfg: &SolverConfig) -> Result<OuterTrace> {
        self.check_control(u0)?;
        lbfgs_minimize(&mut AdjointObjective { ip: self }, u0, cfg)
    }

    fn check_control(&self, u: &[f64]) -> Result<()> {
        if u.len() != 2 {
            return Err(Error::dim("oscillator parameters", 2, u.len()));
        }
        Ok(())
    }

    /// `t,y1_true,y2_true,z,is_outlier` rows.
    pub fn scenario_csv(&self, sim: &Simulation) -> String {
        let mut s = String::from("t,y1_true,y2_true,z,is_outlier\n");
        for k in 0..self.model.n {
            let _ = writeln!(
                s,
                "{:?},{:?},{:?},{:?},{}",
                self.model.time(k),
                sim.y_true[2 * k],
                sim.y_true[2 * k + 1],
                sim.z[k],
                u8::from(sim.outlier_mask[k])
            );
        }
        s
    }

    /// `t,method,y1_hat,y2_hat` rows of the states simulated from each estimate.
    pub fn estimates_csv(&self, estimates: &[(&str, [f64; 2])]) -> String {
        let mut s = String::from("t,method,y1_hat,y2_hat\n");
        for (name, u) in estimates {
            let y = self.model.forward(u);
            for k in 0..self.model.n {
                let _ = writeln!(s, "{:?},{name},{:?},{:?}", self.model.time(k), y[2 * k], y[2 * k + 1]);
            }
        }
        s
    }
}

/// Relative state error `‖ŷ − y‖/‖y‖` of the trajectory simulated from `u`.
pub fn state_error(model: &OscillatorModel, u: &[f64], y_true: &[f64]) -> f64 {
    let y = model.forward(u);
    let num: f64 = y.iter().zip(y_true).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = y_true.iter().map(|v| v * v).sum();
    (num / den).sqrt()
}

struct AdjointObjective<'a> {
    ip: &'a InferenceProblem,
}

impl Objective for AdjointObjective<'_> {
    fn dim(&self) -> usize {
        2
    }
    fn evaluate(&mut self, u: &[f64]) -> Result<Evaluation> {
        let (value, grad) = self.ip.adjoint_gradient(u)?;
        Ok(Evaluation {
            value,
            grad: grad.to_vec(),
            inner_iterations: 0,
            gradient_error: None,
        })
    }
}

impl PenaltyModel for InferenceProblem {
    fn state_dim(&self) -> usize {
        2 * self.model.n
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn constraint_matrix(&self, u: &[f64]) -> Cow<'_, SparseMatrix> {
        Cow::Owned(self.model.dynamics_matrix(u))
    }
    fn rhs(&self, _u: &[f64]) -> Vec<f64> {
        self.v.clone()
    }
    fn jacobian_apply(&self, u: &[f64], y: &[f64], du: &[f64], out: &mut [f64]) {
        let c = 2.0 * self.model.dt;
        out[..2].fill(0.0);
        for k in 1..self.model.n {
            let (p1, p2) = (y[2 * k - 2], y[2 * k - 1]);
            out[2 * k] = c * (du[0] * (u[1] * p1 + u[0] * p2) + du[1] * u[0] * p1);
            out[2 * k + 1] = 0.0;
        }
    }
    fn jacobian_transpose_apply(&self, u: &[f64], y: &[f64], w: &[f64], out: &mut [f64]) {
        let c = 2.0 * self.model.dt;
        let (mut g1, mut g2) = (0.0, 0.0);
        for k in 1..self.model.n {
            let (p1, p2) = (y[2 * k - 2], y[2 * k - 1]);
            g1 += w[2 * k] * (u[1] * p1 + u[0] * p2);
            g2 += w[2 * k] * u[0] * p1;
        }
        out[0] = c * g1;
        out[1] = c * g2;
    }
    fn value(&self, _u: &[f64], y: &[f64]) -> f64 {
        0.5 * (0..self.model.n)
            .map(|k| self.loss.value(self.scaled_residual(k, y)))
            .sum::<f64>()
    }
    fn grad_y(&self, _u: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; 2 * self.model.n];
        for k in 0..self.model.n {
            let s = self.variance[k].sqrt();
            g[2 * k + 1] = 0.5 * self.loss.derivative(self.scaled_residual(k, y)) / s;
        }
        g
    }
    fn hess_y_apply(&self, _u: &[f64], y: &[f64], v: &[f64], out: &mut [f64]) {
        for k in 0..self.model.n {
            let h = 0.5 * self.loss.second_derivative(self.scaled_residual(k, y)) / self.variance[k];
            out[2 * k] = 0.0;
            out[2 * k + 1] = h * v[2 * k + 1];
        }
    }
    fn quadratic_in_y(&self) -> bool {
        self.loss.is_quadratic()
    }
    fn lipschitz_f(&self) -> f64 {
        0.5 / self.variance.iter().copied().fold(f64::INFINITY, f64::min)
    }
    fn initial_state(&self, u: &[f64]) -> Vec<f64> {
        self.model.forward(u)
    }
    fn second_order(&self, u: &[f64], y: &[f64], w: &[f64]) -> Option<SecondOrder> {
        let n2 = 2 * self.model.n;
        let c = 2.0 * self.model.dt;
        let mut r = DMatrix::zeros(2, 2);
        let mut k_yu = DMatrix::zeros(n2, 2);
        for k in 1..self.model.n {
            let (p1, p2, wk) = (y[2 * k - 2], y[2 * k - 1], w[2 * k]);
            r[(0, 0)] += c * wk * p2;
            r[(0, 1)] += c * wk * p1;
            r[(1, 0)] += c * wk * p1;
            k_yu[(2 * k - 2, 0)] = c * u[1] * wk;
            k_yu[(2 * k - 1, 0)] = c * u[0] * wk;
            k_yu[(2 * k - 2, 1)] = c * u[0] * wk;
        }
        Some(SecondOrder {
            h_uu: DMatrix::zeros(2, 2),
            h_yu: DMatrix::zeros(n2, 2),
            r_uu: r,
            k_yu,
        })
    }
}
