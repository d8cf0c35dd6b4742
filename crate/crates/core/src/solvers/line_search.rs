use super::objective::{Evaluation, Objective};
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    /// Total function evaluations allowed.
    pub max_evals: usize,
    pub alpha_max: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_evals: 40,
            alpha_max: 1e10,
        }
    }
}

#[derive(Debug, Clone)]
pub enum LineSearchOutcome {
    Accepted {
        alpha: f64,
        x: Vec<f64>,
        eval: Evaluation,
        inner_iterations: usize,
    },
    Failed {
        inner_iterations: usize,
    },
}

struct Point {
    alpha: f64,
    f: f64,
    slope: f64,
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// safeguarded to the inner 80% of the bracket.
fn interpolate(a: &Point, b: &Point) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let width = hi - lo;
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    let mut t = f64::NAN;
    if disc >= 0.0 {
        let d2 = disc.sqrt().copysign(b.alpha - a.alpha);
        t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    }
    if !t.is_finite() || t < lo + 0.1 * width || t > hi - 0.1 * width {
        t = 0.5 * (lo + hi);
    }
    t
}

/// Line search enforcing the strong Wolfe conditions along descent direction `d`.
pub fn strong_wolfe<O: Objective + ?Sized>(
    obj: &mut O,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha_init: f64,
    params: &WolfeParams,
) -> Result<LineSearchOutcome> {
    let slope0 = dot(g0, d);
    debug_assert!(slope0 < 0.0);
    let mut evals = 0;
    let mut inner = 0;
    // A trial point whose inner problem cannot be solved is treated like one
    // where the objective is undefined: the step is shortened.
    let mut trial = |alpha: f64, evals: &mut usize, inner: &mut usize| -> Result<(Vec<f64>, Evaluation)> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        *evals += 1;
        let e = match obj.evaluate(&xt) {
            Ok(e) => e,
            Err(Error::InnerNotConverged { iterations, .. }) => Evaluation {
                value: f64::INFINITY,
                grad: vec![f64::NAN; xt.len()],
                inner_iterations: iterations,
                gradient_error: None,
            },
            Err(e) => return Err(e),
        };
        *inner += e.inner_iterations;
        Ok((xt, e))
    };
    let sufficient = |alpha: f64, f: f64| f <= f0 + params.c1 * alpha * slope0;
    let curvature = |s: f64| s.abs() <= -params.c2 * slope0;

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        slope: slope0,
    };
    let mut alpha = alpha_init.min(params.alpha_max);
    let (mut lo, mut hi);
    loop {
        if evals >= params.max_evals {
            return Ok(LineSearchOutcome::Failed { inner_iterations: inner });
        }
        let (xt, e) = trial(alpha, &mut evals, &mut inner)?;
        let cur = Point {
            alpha,
            f: e.value,
            slope: dot(&e.grad, d),
        };
        if !cur.f.is_finite() {
            // Step into a region where the objective is undefined; shrink.
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !sufficient(alpha, cur.f) || (evals > 1 && cur.f >= prev.f) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(cur.slope) {
            return Ok(LineSearchOutcome::Accepted {
                alpha,
                x: xt,
                eval: e,
                inner_iterations: inner,
            });
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        if alpha >= params.alpha_max {
            return Ok(LineSearchOutcome::Failed { inner_iterations: inner });
        }
        prev = cur;
        alpha = (4.0 * alpha).min(params.alpha_max);
    }

    // Zoom: `lo` satisfies sufficient decrease and has the lowest value seen.
    loop {
        if evals >= params.max_evals || (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1.0) {
            return Ok(LineSearchOutcome::Failed { inner_iterations: inner });
        }
        let alpha = interpolate(&lo, &hi);
        let (xt, e) = trial(alpha, &mut evals, &mut inner)?;
        let cur = Point {
            alpha,
            f: e.value,
            slope: dot(&e.grad, d),
        };
        if !cur.f.is_finite() || !sufficient(alpha, cur.f) || cur.f >= lo.f {
            hi = cur;
            continue;
        }
        if curvature(cur.slope) {
            return Ok(LineSearchOutcome::Accepted {
                alpha,
                x: xt,
                eval: e,
                inner_iterations: inner,
            });
        }
        if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
            hi = lo;
        }
        lo = cur;
    }
}
