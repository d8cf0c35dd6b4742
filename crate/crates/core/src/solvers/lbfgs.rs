use super::config::SolverConfig;
use super::line_search::{strong_wolfe, LineSearchOutcome, WolfeParams};
use super::objective::{JointObjective, Objective, ReducedObjective};
use super::trace::{OuterTrace, Termination};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::penalty::PenaltyProblem;
use std::collections::VecDeque;
use std::time::Instant;

/// L-BFGS on the reduced function `φ̃(u)`.
pub fn lbfgs(p: &PenaltyProblem<'_>, u0: &[f64], cfg: &SolverConfig) -> Result<OuterTrace> {
    p.check_control(u0)?;
    let mut obj = ReducedObjective::new(*p, cfg.schedule, cfg.warm_start, cfg.seed);
    lbfgs_minimize(&mut obj, u0, cfg)
}

/// L-BFGS on the joint penalized objective over `(u, y)`.
pub fn joint_lbfgs(
    p: &PenaltyProblem<'_>,
    u0: &[f64],
    y0: &[f64],
    cfg: &SolverConfig,
) -> Result<OuterTrace> {
    p.check_control(u0)?;
    if y0.len() != p.state_dim() {
        return Err(Error::dim("joint_lbfgs y0", p.state_dim(), y0.len()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("y0 must be finite".into()));
    }
    let mut x0 = u0.to_vec();
    x0.extend_from_slice(y0);
    let mut obj = JointObjective::new(*p);
    lbfgs_minimize(&mut obj, &x0, cfg)
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    cap: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if sy <= 1e-10 * norm(&s) * norm(&y) {
            return false;
        }
        if self.pairs.len() == self.cap {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Two-loop recursion: returns `−H_k g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

fn wrap(e: Error, iteration: usize, trace: &OuterTrace) -> Error {
    Error::Outer {
        iteration,
        source: Box::new(e),
        trace: Box::new(trace.clone()),
    }
}

/// Limited-memory BFGS with a strong Wolfe line search on any [`Objective`].
pub fn lbfgs_minimize<O: Objective + ?Sized>(
    obj: &mut O,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<OuterTrace> {
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::dim("lbfgs start point", obj.dim(), x0.len()));
    }
    let clock = Instant::now();
    let params = WolfeParams::default();
    let mut trace = OuterTrace::new();
    let mut mem = Memory {
        pairs: VecDeque::new(),
        cap: cfg.lbfgs_memory,
    };

    let mut x = x0.to_vec();
    let mut k = 1;
    let first = obj
        .begin_iteration(k, &x)
        .and_then(|_| obj.evaluate(&x))
        .map_err(|e| wrap(e, k, &trace))?;
    if !first.value.is_finite() {
        return Err(wrap(Error::NonFinite { iteration: k }, k, &trace));
    }
    let (mut f, mut g) = (first.value, first.grad);
    let record = |trace: &mut OuterTrace, f: f64, gn: f64, inner: usize, ctl: &[f64]| {
        let u = if cfg.record_iterates { ctl } else { &[][..] };
        trace.push(u, f, gn, inner, clock.elapsed().as_secs_f64());
    };
    record(&mut trace, f, norm(&g), first.inner_iterations, obj.control(&x));

    loop {
        let gn = norm(&g);
        if gn <= cfg.grad_stop {
            trace.termination = Termination::Converged;
            break;
        }
        if k >= cfg.max_outer {
            trace.termination = Termination::MaxIterations;
            break;
        }
        k += 1;
        obj.begin_iteration(k, &x).map_err(|e| wrap(e, k, &trace))?;

        let mut accepted = None;
        let mut inner = 0;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !mem.pairs.is_empty();
            let mut d = if use_memory { mem.direction(&g) } else { g.iter().map(|v| -v).collect() };
            if dot(&g, &d) >= 0.0 {
                d = g.iter().map(|v| -v).collect();
            }
            let alpha0 = if use_memory { 1.0 } else { (1.0 / norm(&d)).min(1.0) };
            let out = strong_wolfe(obj, &x, f, &g, &d, alpha0, &params).map_err(|e| wrap(e, k, &trace))?;
            match out {
                LineSearchOutcome::Accepted {
                    x: xn,
                    eval,
                    inner_iterations,
                    ..
                } => {
                    inner += inner_iterations;
                    accepted = Some((xn, eval));
                    break;
                }
                LineSearchOutcome::Failed { inner_iterations } => {
                    inner += inner_iterations;
                    if mem.pairs.is_empty() {
                        break;
                    }
                    mem.pairs.clear();
                }
            }
        }
        let Some((xn, eval)) = accepted else {
            trace.termination = Termination::LineSearchFailed;
            if let Some(last) = trace.records.last_mut() {
                last.inner_iterations += inner;
                last.cumulative_inner += inner;
            }
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = eval.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        mem.push(s, yv);
        x = xn;
        f = eval.value;
        g = eval.grad;
        record(&mut trace, f, norm(&g), inner, obj.control(&x));
    }
    if !cfg.record_iterates {
        let ctl = obj.control(&x).to_vec();
        if let Some(last) = trace.records.last_mut() {
            last.u = ctl;
        }
    }
    Ok(trace)
}
