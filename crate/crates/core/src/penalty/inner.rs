use super::model::PenaltyProblem;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve_with, dot, norm, CgStop, NormalOperator, SparseMatrix};

/// Output of the inner minimization `min_y φ(u, y)`.
#[derive(Debug, Clone)]
pub struct InnerSolveResult {
    pub y: Vec<f64>,
    /// `A_u y − q(u)`
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// Explicitly recomputed `‖∇_y φ(u, y)‖`.
    pub grad_norm: f64,
    /// Total conjugate gradient iterations.
    pub iterations: usize,
    /// Newton steps (1 for the quadratic path unless a refinement restart was needed).
    pub newton_steps: usize,
    pub converged: bool,
    /// Tolerance actually enforced: the requested one, or the attainable
    /// roundoff level when that is larger.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct InnerOptions {
    /// Per-solve CG cap; defaults to `max(20n, 2000)`.
    pub max_cg: Option<usize>,
    pub max_newton: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            max_cg: None,
            max_newton: 50,
        }
    }
}

const ARMIJO_SLOPE: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const MAX_REFINE: usize = 8;
/// Relative reduction asked of each refinement pass.
const REFINE_REDUCTION: f64 = 1e-10;

/// Minimizes `φ(u, ·)` to `‖∇_y φ‖ ≤ grad_tol`, starting from `y_warm` when given.
pub fn eval_inner(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    grad_tol: f64,
    y_warm: Option<&[f64]>,
) -> Result<InnerSolveResult> {
    eval_inner_with(p, u, grad_tol, y_warm, &InnerOptions::default())
}

pub fn eval_inner_with(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    grad_tol: f64,
    y_warm: Option<&[f64]>,
    opts: &InnerOptions,
) -> Result<InnerSolveResult> {
    p.check_control(u)?;
    if !(grad_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inner tolerance must be positive, got {grad_tol}"
        )));
    }
    let n = p.state_dim();
    if let Some(y0) = y_warm {
        if y0.len() != n {
            return Err(Error::dim("warm start", n, y0.len()));
        }
    }
    let max_cg = opts.max_cg.unwrap_or((20 * n).max(2000));
    let a = p.model().constraint_matrix(u);
    let q = p.model().rhs(u);
    if q.len() != n {
        return Err(Error::dim("right-hand side", n, q.len()));
    }
    if p.model().quadratic_in_y() {
        solve_quadratic(p, u, &a, &q, grad_tol, y_warm, max_cg)
    } else {
        solve_newton(p, u, &a, &q, grad_tol, y_warm, max_cg, opts.max_newton)
    }
}

/// `√(‖A‖₁‖A‖∞)`, a cheap upper bound on `‖A‖₂`.
fn norm_bound(a: &SparseMatrix) -> f64 {
    let mut col = vec![0.0; a.n_cols()];
    let mut row_max: f64 = 0.0;
    for r in 0..a.n_rows() {
        let mut s = 0.0;
        for (c, v) in a.row(r) {
            s += v.abs();
            col[c] += v.abs();
        }
        row_max = row_max.max(s);
    }
    let col_max = col.into_iter().fold(0.0, f64::max);
    (row_max * col_max).sqrt()
}

/// Level below which `‖∇_y φ‖` cannot be resolved in double precision: rounding
/// y itself moves the residual by about `ε‖A‖‖y‖`.
fn roundoff_floor(p: &PenaltyProblem<'_>, a_norm: f64, y: &[f64], q: &[f64], e: &Eval) -> f64 {
    let lam = p.lambda();
    let scale = (lam * a_norm * a_norm + p.model().lipschitz_f()) * norm(y)
        + lam * a_norm * norm(q)
        + norm(&e.grad_f);
    64.0 * f64::EPSILON * scale
}

struct Eval {
    residual: Vec<f64>,
    grad: Vec<f64>,
    grad_f: Vec<f64>,
}

fn evaluate(p: &PenaltyProblem<'_>, u: &[f64], a: &SparseMatrix, q: &[f64], y: &[f64]) -> Eval {
    let residual = a.residual(y, q).expect("state dimension");
    let grad_f = p.model().grad_y(u, y);
    let mut grad = a.spmv_transpose(&residual).expect("state dimension");
    for (gi, fi) in grad.iter_mut().zip(&grad_f) {
        *gi = p.lambda() * *gi + fi;
    }
    Eval {
        residual,
        grad,
        grad_f,
    }
}

fn finish(
    y: Vec<f64>,
    e: Eval,
    iterations: usize,
    newton_steps: usize,
    converged: bool,
    tolerance: f64,
) -> InnerSolveResult {
    let residual_norm = norm(&e.residual);
    InnerSolveResult {
        y,
        residual_norm,
        residual: e.residual,
        grad_norm: norm(&e.grad),
        iterations,
        newton_steps,
        converged,
        tolerance,
    }
}

/// The inner operator is SPD in exact arithmetic, so a CG breakdown means the
/// system is too ill-conditioned to resolve.
fn is_roundoff_breakdown(e: &Error) -> bool {
    matches!(e, Error::NotPositiveDefinite { .. } | Error::Breakdown { .. })
}

fn give_up(y: Vec<f64>, e: Eval, iterations: usize, steps: usize) -> Error {
    let gn = norm(&e.grad);
    let best = finish(y, e, iterations, steps, false, gn);
    Error::InnerNotConverged {
        grad_norm: gn,
        iterations,
        best: Box::new(best),
    }
}

fn solve_quadratic(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    a: &SparseMatrix,
    q: &[f64],
    grad_tol: f64,
    y_warm: Option<&[f64]>,
    max_cg: usize,
) -> Result<InnerSolveResult> {
    let n = p.state_dim();
    let model = p.model();
    let zero = vec![0.0; n];
    // H is constant, so it can be applied at any y.
    let op = NormalOperator::with_symmetric_part(a, p.lambda(), |x: &[f64], out: &mut [f64]| {
        model.hess_y_apply(u, &zero, x, out)
    });
    let a_norm = norm_bound(a);

    let mut y = match y_warm {
        Some(w) => w.to_vec(),
        None => vec![0.0; n],
    };
    let mut iterations = 0;
    let mut solves = 0;
    let mut prev = f64::INFINITY;
    let mut last_converged = true;
    loop {
        let e = evaluate(p, u, a, q, &y);
        let gn = norm(&e.grad);
        if !gn.is_finite() {
            return Err(Error::Breakdown { iteration: iterations });
        }
        if gn <= grad_tol {
            return Ok(finish(y, e, iterations, solves, true, grad_tol));
        }
        // Iterative refinement: each pass solves H d = −∇φ against an
        // accurately recomputed gradient.
        let stalled = solves > 0 && (gn > 0.5 * prev || solves > MAX_REFINE || !last_converged);
        if stalled {
            let ok = gn <= roundoff_floor(p, a_norm, &y, q, &e);
            let r = finish(y, e, iterations, solves, ok, grad_tol.max(gn));
            if ok {
                return Ok(r);
            }
            return Err(Error::InnerNotConverged {
                grad_norm: gn,
                iterations,
                best: Box::new(r),
            });
        }
        let neg_g: Vec<f64> = e.grad.iter().map(|v| -v).collect();
        let target = grad_tol.max(REFINE_REDUCTION * gn);
        let sol = match cg_solve_with(&op, &neg_g, None, CgStop::Absolute(target), max_cg) {
            Ok(sol) => sol,
            Err(err) if is_roundoff_breakdown(&err) => return Err(give_up(y, e, iterations, solves.max(1))),
            Err(err) => return Err(err),
        };
        iterations += sol.iterations;
        last_converged = sol.converged;
        for (yi, di) in y.iter_mut().zip(&sol.x) {
            *yi += di;
        }
        prev = gn;
        solves += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_newton(
    p: &PenaltyProblem<'_>,
    u: &[f64],
    a: &SparseMatrix,
    q: &[f64],
    grad_tol: f64,
    y_warm: Option<&[f64]>,
    max_cg: usize,
    max_newton: usize,
) -> Result<InnerSolveResult> {
    let lam = p.lambda();
    let model = p.model();
    let a_norm = norm_bound(a);
    let phi = |y: &[f64]| {
        let r = a.residual(y, q).expect("state dimension");
        model.value(u, y) + 0.5 * lam * dot(&r, &r)
    };

    let mut y = match y_warm {
        Some(w) => w.to_vec(),
        None => model.initial_state(u),
    };
    let mut e = evaluate(p, u, a, q, &y);
    let mut f_cur = phi(&y);
    let mut iterations = 0;
    let mut steps = 0;
    let mut stalls = 0;
    loop {
        let gn = norm(&e.grad);
        if !gn.is_finite() || !f_cur.is_finite() {
            return Err(Error::Breakdown { iteration: iterations });
        }
        if gn <= grad_tol {
            return Ok(finish(y, e, iterations, steps, true, grad_tol));
        }
        let floor = roundoff_floor(p, a_norm, &y, q, &e);
        if steps >= max_newton || stalls >= 3 {
            let ok = gn <= floor;
            let r = finish(y, e, iterations, steps, ok, grad_tol.max(gn));
            if ok {
                return Ok(r);
            }
            return Err(Error::InnerNotConverged {
                grad_norm: gn,
                iterations,
                best: Box::new(r),
            });
        }

        let y_at = y.clone();
        let op = NormalOperator::with_symmetric_part(a, lam, |x: &[f64], out: &mut [f64]| {
            model.hess_y_apply(u, &y_at, x, out)
        });
        let forcing = 0.1f64.min(gn.sqrt());
        let target = (forcing * gn).max(0.5 * grad_tol);
        let neg_g: Vec<f64> = e.grad.iter().map(|v| -v).collect();
        let sol = match cg_solve_with(&op, &neg_g, None, CgStop::Absolute(target), max_cg) {
            Ok(sol) => sol,
            Err(err) if is_roundoff_breakdown(&err) => return Err(give_up(y, e, iterations, steps)),
            Err(err) => return Err(err),
        };
        iterations += sol.iterations;
        let d = sol.x;
        let slope = dot(&e.grad, &d);
        if !(slope < 0.0) {
            stalls += 1;
            steps += 1;
            continue;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial: Vec<f64> = y.iter().zip(&d).map(|(yi, di)| yi + t * di).collect();
            let f_trial = phi(&trial);
            // Slack of a few ulps of φ so that roundoff alone cannot reject a step.
            if f_trial <= f_cur + ARMIJO_SLOPE * t * slope + 16.0 * f64::EPSILON * f_cur.abs() {
                accepted = Some((trial, f_trial));
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        match accepted {
            Some((trial, f_trial)) => {
                let e_new = evaluate(p, u, a, q, &trial);
                // Damped steps may leave ‖∇φ‖ flat while φ still drops; only
                // count a stall when neither moves.
                let flat = f_cur - f_trial <= 1e-12 * f_cur.abs();
                if flat && norm(&e_new.grad) > 0.9 * gn {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                y = trial;
                e = e_new;
                f_cur = f_trial;
            }
            None => stalls = 3,
        }
    }
}
