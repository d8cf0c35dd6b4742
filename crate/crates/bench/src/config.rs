//! Experiment configuration, read from a TOML file and overridden by CLI flags.

use crate::error::{BenchError, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use varpen::penalty::ToleranceSchedule;
use varpen::problems::loss::{LossKind, LossSpec};
use varpen::solvers::{Method, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Boundary,
    Transport,
    Oscillator,
    /// One-dimensional closed-form instance, useful for checking the tooling.
    ScalarToy,
}

impl std::str::FromStr for ProblemKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundary" => Ok(Self::Boundary),
            "transport" => Ok(Self::Transport),
            "oscillator" => Ok(Self::Oscillator),
            "scalar_toy" => Ok(Self::ScalarToy),
            other => Err(BenchError::Config(format!("unknown problem `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arms {
    Projected,
    Joint,
    Both,
}

impl std::str::FromStr for Arms {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projected" => Ok(Self::Projected),
            "joint" => Ok(Self::Joint),
            "both" => Ok(Self::Both),
            other => Err(BenchError::Config(format!("unknown arms `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// Standard normal entries drawn from the run seed.
    Random,
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzPoint {
    Initial,
    Final,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: String,
    pub max_outer: usize,
    pub grad_stop: f64,
    pub memory: usize,
    /// `fixed` or `one_over_k`.
    pub schedule: String,
    /// Schedule constant; `1e-12` for `fixed`, `1e-2‖∇H(u0)‖` for `one_over_k` when absent.
    pub schedule_c: Option<f64>,
    pub schedule_floor: f64,
    pub warm_start: bool,
    pub step_beta: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            method: "lbfgs".into(),
            max_outer: 1000,
            grad_stop: 1e-8,
            memory: 10,
            schedule: "fixed".into(),
            schedule_c: None,
            schedule_floor: 1e-14,
            warm_start: true,
            step_beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub n_per_side: usize,
    pub source_center: [f64; 2],
    pub source_width: f64,
    pub u0: StartPoint,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self {
            n_per_side: 33,
            source_center: [0.25, 0.25],
            source_width: 0.1,
            u0: StartPoint::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportSection {
    pub nx: usize,
    pub nt: usize,
    pub horizon: f64,
    pub alpha: f64,
}

impl Default for TransportSection {
    fn default() -> Self {
        Self {
            nx: 16,
            nt: 8,
            horizon: 1.0,
            alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorSection {
    pub n: usize,
    pub periods: f64,
    pub omega: f64,
    pub u_true: [f64; 2],
    pub u0: [f64; 2],
    pub sigma: f64,
    pub outlier_frac: f64,
    pub outlier_range: [f64; 2],
    /// `ls`, `huber` or `smoothed_huber`.
    pub loss: String,
    pub kappa: f64,
    /// Blend half-width for `smoothed_huber`; `κ/10` when absent.
    pub eps: Option<f64>,
    /// Also solve the constrained problem by the adjoint method (`lambda = inf` row).
    pub adjoint: bool,
}

impl Default for OscillatorSection {
    fn default() -> Self {
        Self {
            n: 400,
            periods: 4.0,
            omega: 2.0,
            u_true: [2.0, 0.1],
            u0: [1.0, 1.0],
            sigma: 0.1,
            outlier_frac: 0.1,
            outlier_range: [0.0, 2.0],
            loss: "smoothed_huber".into(),
            kappa: 0.1,
            eps: None,
            adjoint: false,
        }
    }
}

impl OscillatorSection {
    pub fn loss_spec(&self) -> Result<LossSpec> {
        let kind: LossKind = self.loss.parse().map_err(|e: varpen::Error| BenchError::Config(e.to_string()))?;
        let spec = match kind {
            LossKind::LeastSquares => Ok(LossSpec::least_squares()),
            LossKind::Huber => LossSpec::huber(self.kappa),
            LossKind::SmoothedHuber => LossSpec::smoothed_huber(self.kappa, self.eps.unwrap_or(self.kappa / 10.0)),
        };
        spec.map_err(|e| BenchError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarToySection {
    pub u0: f64,
}

impl Default for ScalarToySection {
    fn default() -> Self {
        Self { u0: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzSection {
    pub iters: usize,
    /// Where to evaluate; `final` for transport and `initial` otherwise when absent.
    pub at: Option<LipschitzPoint>,
}

impl Default for LipschitzSection {
    fn default() -> Self {
        Self { iters: 50, at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub lambdas: Vec<f64>,
    pub arms: Arms,
    pub continuation: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Add a Lipschitz estimate at the final iterate to every summary row.
    pub estimate_lipschitz: bool,
    pub solver: SolverSection,
    pub boundary: BoundarySection,
    pub transport: TransportSection,
    pub oscillator: OscillatorSection,
    pub scalar_toy: ScalarToySection,
    pub lipschitz: LipschitzSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Boundary,
            lambdas: vec![1e3, 1e5, 1e7],
            arms: Arms::Projected,
            continuation: false,
            seed: 0,
            out_dir: None,
            estimate_lipschitz: false,
            solver: SolverSection::default(),
            boundary: BoundarySection::default(),
            transport: TransportSection::default(),
            oscillator: OscillatorSection::default(),
            scalar_toy: ScalarToySection::default(),
            lipschitz: LipschitzSection::default(),
        }
    }
}

/// Text shown by `bench --help` listing every key and its default.
pub const CONFIG_HELP: &str = "\
Config file (TOML). Keys and defaults:
  problem = \"boundary\"            boundary | transport | oscillator | scalar_toy
  lambdas = [1e3, 1e5, 1e7]       strictly increasing, positive
  arms = \"projected\"              projected | joint | both
  continuation = false            warm-start each lambda from the previous result
  seed = 0
  out_dir = (unset)               falls back to $BENCH_OUT_DIR, then ./bench_out
  estimate_lipschitz = false
  [solver]   method = \"lbfgs\" (gd | gd-inexact | lbfgs), max_outer = 1000, grad_stop = 1e-8,
             memory = 10, schedule = \"fixed\" (fixed | one_over_k), schedule_c = (1e-12 fixed,
             1e-2*|grad H(u0)| one_over_k), schedule_floor = 1e-14, warm_start = true, step_beta = (estimated)
  [boundary] n_per_side = 33, source_center = [0.25, 0.25], source_width = 0.1, u0 = \"random\" (random | ones)
  [transport] nx = 16, nt = 8, horizon = 1.0, alpha = 0.1
  [oscillator] n = 400, periods = 4.0, omega = 2.0, u_true = [2.0, 0.1], u0 = [1.0, 1.0], sigma = 0.1,
             outlier_frac = 0.1, outlier_range = [0.0, 2.0], loss = \"smoothed_huber\" (ls | huber | smoothed_huber),
             kappa = 0.1, eps = kappa/10, adjoint = false
  [scalar_toy] u0 = 2.0
  [lipschitz] iters = 50, at = (initial; final for transport)";

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(BenchError::Config("lambdas must not be empty".into()));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(BenchError::Config("lambdas must be positive and finite".into()));
        }
        if self.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BenchError::Config("lambdas must be strictly increasing".into()));
        }
        let method = self.method()?;
        if method != Method::Lbfgs && self.arms != Arms::Projected {
            return Err(BenchError::Config("the joint arm runs L-BFGS only; use method = \"lbfgs\"".into()));
        }
        if self.lipschitz.iters == 0 {
            return Err(BenchError::Config("lipschitz.iters must be positive".into()));
        }
        if self.problem == ProblemKind::Oscillator {
            self.oscillator.loss_spec()?;
        } else if self.oscillator.adjoint {
            return Err(BenchError::Config("the adjoint arm exists for the oscillator only".into()));
        }
        self.solver_config(1.0)?;
        Ok(())
    }

    pub fn method(&self) -> Result<Method> {
        self.solver
            .method
            .parse()
            .map_err(|e: varpen::Error| BenchError::Config(e.to_string()))
    }

    pub fn uses_one_over_k(&self) -> bool {
        self.solver.schedule == "one_over_k"
    }

    /// Solver settings; `default_c` fills in a missing schedule constant.
    pub fn solver_config(&self, default_c: f64) -> Result<SolverConfig> {
        let s = &self.solver;
        let schedule = match s.schedule.as_str() {
            "fixed" => ToleranceSchedule::fixed(s.schedule_c.unwrap_or(1e-12)),
            "one_over_k" => ToleranceSchedule::one_over_k(s.schedule_c.unwrap_or(default_c), s.schedule_floor),
            other => return Err(BenchError::Config(format!("unknown schedule `{other}`"))),
        };
        let cfg = SolverConfig {
            method: self.method()?,
            max_outer: s.max_outer,
            grad_stop: s.grad_stop,
            lbfgs_memory: s.memory,
            step_beta: s.step_beta,
            schedule,
            seed: self.seed,
            warm_start: s.warm_start,
            record_iterates: true,
        };
        cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn lipschitz_point(&self) -> LipschitzPoint {
        self.lipschitz.at.unwrap_or(match self.problem {
            ProblemKind::Transport => LipschitzPoint::Final,
            _ => LipschitzPoint::Initial,
        })
    }

    /// Output directory: explicit setting, then `$BENCH_OUT_DIR`, then `bench_out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("BENCH_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("bench_out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            problem = "oscillator"
            lambdas = [1e5, 1e9]
            [solver]
            method = "gd-inexact"
            schedule = "one_over_k"
            [oscillator]
            loss = "ls"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemKind::Oscillator);
        assert_eq!(cfg.oscillator.n, 400);
        assert_eq!(cfg.method().unwrap(), Method::GdInexact);
        assert!(cfg.uses_one_over_k());
        cfg.validate().unwrap();
        assert_eq!(cfg.solver_config(0.5).unwrap().schedule.c, 0.5);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "lambdas = []",
            "lambdas = [1e3, 1e2]",
            "lambdas = [-1.0]",
            "[solver]\nmethod = \"newton\"",
            "[solver]\nschedule = \"sqrt\"",
            "arms = \"both\"\n[solver]\nmethod = \"gd\"",
        ] {
            let cfg = ExperimentConfig::from_toml_str(text).unwrap();
            assert!(cfg.validate().unwrap_err().is_config(), "{text}");
        }
        assert!(ExperimentConfig::from_toml_str("unknown_key = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("problem = \"heat\"").is_err());
    }

    #[test]
    fn lipschitz_point_defaults() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.lipschitz_point(), LipschitzPoint::Initial);
        cfg.problem = ProblemKind::Transport;
        assert_eq!(cfg.lipschitz_point(), LipschitzPoint::Final);
    }
}
