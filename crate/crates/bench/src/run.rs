//! Experiment execution: λ-sweeps over one or more solver arms.

use crate::config::{Arms, ExperimentConfig, LipschitzPoint, ProblemKind, StartPoint};
use crate::error::{BenchError, Result};
use crate::output;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;
use varpen::penalty::{eval_inner, tight_tolerance, PenaltyModel, PenaltyProblem};
use varpen::problems::boundary::{assemble, build_lshape, BoundaryControl};
use varpen::problems::oscillator::{simulate, InferenceProblem, OscillatorModel, Simulation};
use varpen::problems::toy::ScalarToy;
use varpen::problems::transport::Transport;
use varpen::solvers::{
    default_schedule_constant, estimate_lipschitz, gradient_descent, joint_lbfgs, lbfgs, Method, OuterTrace,
};

/// A solver arm of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arm {
    /// Outer solver on the reduced function `φ̃(u)`.
    Projected,
    /// L-BFGS on the penalized objective over `(u, y)`.
    Joint,
    /// Constrained problem with adjoint gradients (`λ = ∞`).
    Adjoint,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Projected => "projected",
            Arm::Joint => "joint",
            Arm::Adjoint => "adjoint",
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A problem instance built from the configuration.
pub enum Instance {
    Boundary(BoundaryControl),
    Transport(Transport),
    Oscillator { problem: InferenceProblem, sim: Simulation },
    ScalarToy(ScalarToy),
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match cfg.problem {
            ProblemKind::Boundary => {
                let b = &cfg.boundary;
                Instance::Boundary(assemble(build_lshape(b.n_per_side)?, b.source_center, b.source_width)?)
            }
            ProblemKind::Transport => {
                let t = &cfg.transport;
                Instance::Transport(Transport::with_size(t.nx, t.nt, t.horizon, t.alpha)?)
            }
            ProblemKind::Oscillator => {
                let o = &cfg.oscillator;
                let model = OscillatorModel::over_periods(o.n, o.periods, o.omega)?;
                let sim = simulate(
                    &model,
                    o.u_true,
                    o.sigma,
                    o.outlier_frac,
                    (o.outlier_range[0], o.outlier_range[1]),
                    cfg.seed,
                )?;
                let problem = InferenceProblem::with_variance(model, sim.z.clone(), o.sigma * o.sigma, o.loss_spec()?)?;
                Instance::Oscillator { problem, sim }
            }
            ProblemKind::ScalarToy => Instance::ScalarToy(ScalarToy),
        })
    }

    pub fn model(&self) -> &dyn PenaltyModel {
        match self {
            Instance::Boundary(m) => m,
            Instance::Transport(m) => m,
            Instance::Oscillator { problem, .. } => problem,
            Instance::ScalarToy(m) => m,
        }
    }

    pub fn penalty(&self, lambda: f64) -> varpen::Result<PenaltyProblem<'_>> {
        match self {
            Instance::Oscillator { problem, .. } => problem.as_penalty_problem(lambda),
            _ => PenaltyProblem::new(self.model(), lambda),
        }
    }

    /// Starting control. Boundary draws standard normal entries from the seed;
    /// transport starts from zero flow.
    pub fn initial_control(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        let d = self.model().control_dim();
        match self {
            Instance::Boundary(_) => match cfg.boundary.u0 {
                StartPoint::Ones => vec![1.0; d],
                StartPoint::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
                }
            },
            Instance::Transport(_) => vec![0.0; d],
            Instance::Oscillator { .. } => cfg.oscillator.u0.to_vec(),
            Instance::ScalarToy(_) => vec![cfg.scalar_toy.u0],
        }
    }
}

/// One row of `summary.csv` together with the trace behind it.
#[derive(Debug, Clone)]
pub struct SummaryRecord {
    /// `f64::INFINITY` for the adjoint arm.
    pub lambda: f64,
    pub arm: Arm,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub lipschitz_estimate: Option<f64>,
    pub u_estimate: Vec<f64>,
    pub wall_seconds: f64,
    /// Solver termination reason, or `failed: <message>`.
    pub status: String,
    pub trace: Option<OuterTrace>,
}

impl SummaryRecord {
    pub fn failed(&self) -> bool {
        self.status.starts_with("failed")
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepSummary {
    pub records: Vec<SummaryRecord>,
}

impl SweepSummary {
    pub fn has_failures(&self) -> bool {
        self.records.iter().any(SummaryRecord::failed)
    }

    pub fn get(&self, arm: Arm, lambda: f64) -> Option<&SummaryRecord> {
        self.records.iter().find(|r| r.arm == arm && r.lambda == lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzRow {
    pub lambda: f64,
    pub estimate: Option<f64>,
    pub status: String,
}

struct Job {
    lambda_idx: usize,
    arm: Arm,
}

struct Outcome {
    trace: Option<OuterTrace>,
    lipschitz: Option<f64>,
    error: Option<String>,
}

fn solve(inst: &Instance, cfg: &ExperimentConfig, lambda: f64, arm: Arm, u0: &[f64]) -> Outcome {
    let mut out = Outcome {
        trace: None,
        lipschitz: None,
        error: None,
    };
    let attempt = || -> varpen::Result<OuterTrace> {
        if arm == Arm::Adjoint {
            let Instance::Oscillator { problem, .. } = inst else {
                unreachable!("adjoint arm is rejected for other problems")
            };
            let scfg = cfg.solver_config(1.0).expect("validated");
            return problem.solve_constrained(u0, &scfg);
        }
        let p = inst.penalty(lambda)?;
        let default_c = if cfg.uses_one_over_k() && cfg.solver.schedule_c.is_none() {
            default_schedule_constant(&p, u0)?
        } else {
            1.0
        };
        let scfg = cfg.solver_config(default_c).expect("validated");
        match (arm, scfg.method) {
            (Arm::Joint, _) => {
                let y0 = eval_inner(&p, u0, tight_tolerance(&p, u0), None)?.y;
                joint_lbfgs(&p, u0, &y0, &scfg)
            }
            (_, Method::Lbfgs) => lbfgs(&p, u0, &scfg),
            _ => gradient_descent(&p, u0, &scfg),
        }
    };
    match attempt() {
        Ok(t) => out.trace = Some(t),
        Err(varpen::Error::Outer { source, trace, .. }) => {
            out.trace = Some(*trace);
            out.error = Some(source.to_string());
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    if cfg.estimate_lipschitz && arm != Arm::Adjoint && out.error.is_none() {
        let at = match cfg.lipschitz_point() {
            LipschitzPoint::Initial => u0,
            LipschitzPoint::Final => out.trace.as_ref().map(|t| t.final_u()).unwrap_or(u0),
        };
        match inst
            .penalty(lambda)
            .and_then(|p| estimate_lipschitz(&p, at, cfg.lipschitz.iters, cfg.seed))
        {
            Ok(l) => out.lipschitz = Some(l),
            Err(e) => out.error = Some(format!("lipschitz: {e}")),
        }
    }
    out
}

fn record(lambda: f64, arm: Arm, out: Outcome, wall_seconds: f64) -> SummaryRecord {
    let last = out.trace.as_ref().and_then(|t| t.last());
    let status = match (&out.error, &out.trace) {
        (Some(e), _) => format!("failed: {e}"),
        (None, Some(t)) => t.termination.to_string(),
        (None, None) => "failed: no trace".into(),
    };
    SummaryRecord {
        lambda,
        arm,
        final_objective: last.map_or(f64::NAN, |r| r.objective),
        final_grad_norm: last.map_or(f64::NAN, |r| r.grad_norm),
        outer_iters: out.trace.as_ref().map_or(0, |t| t.iterations()),
        total_inner_iters: out.trace.as_ref().map_or(0, |t| t.total_inner()),
        lipschitz_estimate: out.lipschitz,
        u_estimate: last.map(|r| r.u.clone()).unwrap_or_default(),
        wall_seconds,
        status,
        trace: out.trace,
    }
}

/// Runs a chain of jobs; with continuation each job starts where the previous one ended.
fn run_chain(inst: &Instance, cfg: &ExperimentConfig, u0: &[f64], chain: &[Job]) -> Vec<SummaryRecord> {
    let mut start = u0.to_vec();
    chain
        .iter()
        .map(|job| {
            let lambda = if job.arm == Arm::Adjoint {
                f64::INFINITY
            } else {
                cfg.lambdas[job.lambda_idx]
            };
            log::info!("{} arm, lambda = {lambda:e}", job.arm);
            let clock = Instant::now();
            let out = solve(inst, cfg, lambda, job.arm, &start);
            let rec = record(lambda, job.arm, out, clock.elapsed().as_secs_f64());
            if rec.failed() {
                log::warn!("{} arm, lambda = {lambda:e}: {}", job.arm, rec.status);
            } else if cfg.continuation && !rec.u_estimate.is_empty() {
                start.clone_from(&rec.u_estimate);
            }
            rec
        })
        .collect()
}

fn run_chains<T, F>(chains: &[Vec<Job>], jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[Job]) -> Vec<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 && chains.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start {jobs} workers: {e}")))?;
        let nested: Vec<Vec<T>> = pool.install(|| chains.par_iter().map(|c| f(c)).collect());
        return Ok(nested.into_iter().flatten().collect());
    }
    #[cfg(not(feature = "parallel"))]
    if jobs > 1 {
        log::warn!("built without the parallel feature; running {} jobs sequentially", chains.len());
    }
    Ok(chains.iter().flat_map(|c| f(c)).collect())
}

fn prepare(cfg: &ExperimentConfig, jobs: usize) -> Result<(Instance, std::path::PathBuf)> {
    cfg.validate()?;
    if jobs == 0 {
        return Err(BenchError::Config("--jobs must be at least 1".into()));
    }
    let dir = cfg.resolve_out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| BenchError::Config(format!("{}: {e}", dir.display())))?;
    Ok((Instance::build(cfg)?, dir))
}

/// Runs every configured (λ, arm) pair and writes the trace files and `summary.csv`.
///
/// Solver failures are recorded in the status column and do not stop the sweep.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<SweepSummary> {
    let (inst, dir) = prepare(cfg, jobs)?;
    let u0 = inst.initial_control(cfg);
    let arms: &[Arm] = match cfg.arms {
        Arms::Projected => &[Arm::Projected],
        Arms::Joint => &[Arm::Joint],
        Arms::Both => &[Arm::Projected, Arm::Joint],
    };
    let mut chains: Vec<Vec<Job>> = Vec::new();
    for &arm in arms {
        let jobs = (0..cfg.lambdas.len()).map(|lambda_idx| Job { lambda_idx, arm });
        if cfg.continuation {
            chains.push(jobs.collect());
        } else {
            chains.extend(jobs.map(|j| vec![j]));
        }
    }
    if cfg.problem == ProblemKind::Oscillator && cfg.oscillator.adjoint {
        chains.push(vec![Job {
            lambda_idx: 0,
            arm: Arm::Adjoint,
        }]);
    }
    let mut records = run_chains(&chains, jobs, |c| run_chain(&inst, cfg, &u0, c))?;
    records.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.arm.cmp(&b.arm)));

    for r in &records {
        if let Some(t) = &r.trace {
            output::write_file(&dir.join(output::trace_file_name(r.arm, r.lambda)), &output::trace_csv(t)?)?;
        }
    }
    let summary = SweepSummary { records };
    output::write_file(&dir.join(output::SUMMARY_FILE), &output::summary_csv(&summary)?)?;
    if let Instance::Oscillator { problem, sim } = &inst {
        output::write_file(&dir.join("scenario.csv"), &problem.scenario_csv(sim))?;
    }
    Ok(summary)
}

/// Gauss–Newton Lipschitz estimates of `∇φ̃` for each λ, written to `lipschitz.csv`.
///
/// At the final point a projected solve is run first for each λ.
pub fn lipschitz_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<LipschitzRow>> {
    let (inst, dir) = prepare(cfg, jobs)?;
    let u0 = inst.initial_control(cfg);
    let chains: Vec<Vec<Job>> = (0..cfg.lambdas.len())
        .map(|lambda_idx| {
            vec![Job {
                lambda_idx,
                arm: Arm::Projected,
            }]
        })
        .collect();
    let rows = run_chains(&chains, jobs, |c| {
        c.iter()
            .map(|job| {
                let lambda = cfg.lambdas[job.lambda_idx];
                let point = match cfg.lipschitz_point() {
                    LipschitzPoint::Initial => Ok(u0.clone()),
                    LipschitzPoint::Final => {
                        let rec = record(lambda, Arm::Projected, solve(&inst, cfg, lambda, Arm::Projected, &u0), 0.0);
                        if rec.failed() {
                            Err(rec.status.trim_start_matches("failed: ").to_string())
                        } else {
                            Ok(rec.u_estimate)
                        }
                    }
                };
                let est = point.and_then(|u| {
                    let p = inst.penalty(lambda).map_err(|e| e.to_string())?;
                    estimate_lipschitz(&p, &u, cfg.lipschitz.iters, cfg.seed).map_err(|e| e.to_string())
                });
                match est {
                    Ok(v) => LipschitzRow {
                        lambda,
                        estimate: Some(v),
                        status: "ok".into(),
                    },
                    Err(e) => {
                        log::warn!("lipschitz at lambda = {lambda:e}: {e}");
                        LipschitzRow {
                            lambda,
                            estimate: None,
                            status: format!("failed: {e}"),
                        }
                    }
                }
            })
            .collect()
    })?;
    output::write_file(&dir.join(output::LIPSCHITZ_FILE), &output::lipschitz_csv(&rows)?)?;
    Ok(rows)
}
