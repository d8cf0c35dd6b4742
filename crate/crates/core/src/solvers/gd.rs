use super::config::{Method, SolverConfig};
use super::lipschitz::estimate_lipschitz;
use super::objective::{Objective, ReducedObjective};
use super::trace::{OuterTrace, Termination};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::penalty::{PenaltyProblem, ScheduleMode, ToleranceSchedule};
use std::time::Instant;

const LIPSCHITZ_ITERS: usize = 50;

/// Fixed-step (possibly inexact) gradient descent `u_{k+1} = u_k − v_k/β`.
pub fn gradient_descent(p: &PenaltyProblem<'_>, u0: &[f64], cfg: &SolverConfig) -> Result<OuterTrace> {
    cfg.validate()?;
    p.check_control(u0)?;
    let schedule = match cfg.method {
        Method::GdFixed => ToleranceSchedule {
            mode: ScheduleMode::Fixed,
            ..cfg.schedule
        },
        Method::GdInexact => cfg.schedule,
        Method::Lbfgs => {
            return Err(Error::InvalidParameter(
                "gradient_descent called with the lbfgs method".into(),
            ))
        }
    };
    let clock = Instant::now();
    let mut obj = ReducedObjective::new(*p, schedule, cfg.warm_start, cfg.seed);
    let mut trace = OuterTrace::new();
    let mut beta = cfg.step_beta;
    let mut u = u0.to_vec();
    let fail = |e: Error, k: usize, trace: &OuterTrace| Error::Outer {
        iteration: k,
        source: Box::new(e),
        trace: Box::new(trace.clone()),
    };

    for k in 1..=cfg.max_outer {
        let e = obj
            .begin_iteration(k, &u)
            .and_then(|_| obj.evaluate(&u))
            .map_err(|e| fail(e, k, &trace))?;
        if !e.value.is_finite() || e.grad.iter().any(|g| !g.is_finite()) {
            return Err(fail(Error::NonFinite { iteration: k }, k, &trace));
        }
        let vn = norm(&e.grad);
        let recorded: &[f64] = if cfg.record_iterates || k == cfg.max_outer || vn <= cfg.grad_stop {
            &u
        } else {
            &[]
        };
        trace.push(recorded, e.value, vn, e.inner_iterations, clock.elapsed().as_secs_f64());
        if vn <= cfg.grad_stop {
            trace.termination = Termination::Converged;
            break;
        }
        if k == cfg.max_outer {
            break;
        }
        let b = match beta {
            Some(b) => b,
            None => {
                let est = estimate_lipschitz(p, u0, LIPSCHITZ_ITERS, cfg.seed)
                    .map_err(|e| fail(e, k, &trace))?;
                if !(est > 0.0) {
                    return Err(fail(
                        Error::InvalidParameter("Lipschitz estimate is zero; supply step_beta".into()),
                        k,
                        &trace,
                    ));
                }
                beta = Some(1.1 * est);
                trace.beta = beta;
                1.1 * est
            }
        };
        trace.beta = Some(b);
        let rec = trace.records.last_mut().unwrap();
        if let Some(err) = e.gradient_error {
            // H(u − v/β) − H(u) ≤ (‖v − ∇H‖² − ‖∇H‖²)/(2β) with ‖∇H‖ ≥ (‖v‖ − err)₊.
            let lower = (vn - err).max(0.0);
            rec.gradient_error = Some(err);
            rec.descent_bound = Some((err * err - lower * lower) / (2.0 * b));
        }
        for (ui, gi) in u.iter_mut().zip(&e.grad) {
            *ui -= gi / b;
        }
    }
    if trace.termination != Termination::Converged {
        trace.termination = Termination::MaxIterations;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::toy::{DiagToy, ScalarToy};

    #[test]
    fn scalar_toy_drifts_toward_stationarity() {
        // φ̃ decreases in |u| with a gradient ~ 1/u³, so iterates drift outward
        // and the gradient vanishes slowly.
        let p = PenaltyProblem::new(&ScalarToy, 10.0).unwrap();
        let cfg = SolverConfig {
            method: Method::GdFixed,
            max_outer: 500,
            grad_stop: 1e-8,
            schedule: ToleranceSchedule::fixed(1e-12),
            ..Default::default()
        };
        let t = gradient_descent(&p, &[2.0], &cfg).unwrap();
        let g0 = t.records[0].grad_norm;
        assert!((g0 - ScalarToy::reduced_gradient(10.0, 2.0).abs()).abs() < 1e-12);
        let last = t.last().unwrap();
        assert!(last.grad_norm < 1e-2 * g0);
        let u = t.final_u()[0];
        assert!((last.grad_norm - ScalarToy::reduced_gradient(10.0, u).abs()).abs() < 1e-10);
        for w in t.records.windows(2) {
            assert!(w[1].objective <= w[0].objective);
            assert!(w[1].u[0] > w[0].u[0]);
        }
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let m = DiagToy::new(vec![2.0, 4.0]);
        let p = PenaltyProblem::new(&m, 5.0).unwrap();
        let cfg = SolverConfig {
            method: Method::GdFixed,
            ..Default::default()
        };
        let t = gradient_descent(&p, &[2.0, 4.0], &cfg).unwrap();
        assert_eq!(t.iterations(), 1);
        assert!(t.records[0].grad_norm < 1e-12);
        assert_eq!(t.termination, Termination::Converged);
    }

    #[test]
    fn rejects_lbfgs_method() {
        let p = PenaltyProblem::new(&ScalarToy, 1.0).unwrap();
        assert!(gradient_descent(&p, &[1.0], &SolverConfig::default()).is_err());
    }
}
