use crate::error::{Error, Result};
use crate::penalty::ToleranceSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Fixed-step descent with a fixed inner tolerance.
    GdFixed,
    /// Fixed-step descent with the configured (typically 1/k) inner schedule.
    GdInexact,
    Lbfgs,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" | "gd_fixed" | "gd-fixed" => Ok(Method::GdFixed),
            "gd-inexact" | "gd_inexact" => Ok(Method::GdInexact),
            "lbfgs" => Ok(Method::Lbfgs),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_outer: usize,
    pub grad_stop: f64,
    pub lbfgs_memory: usize,
    /// `β` for fixed-step descent; estimated at `u0` when absent.
    pub step_beta: Option<f64>,
    pub schedule: ToleranceSchedule,
    pub seed: u64,
    /// Reuse the previous inner solution as the next starting point.
    pub warm_start: bool,
    /// Store `u_k` in every trace record.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs,
            max_outer: 1000,
            grad_stop: 1e-8,
            lbfgs_memory: 10,
            step_beta: None,
            schedule: ToleranceSchedule::fixed(1e-12),
            seed: 0,
            warm_start: true,
            record_iterates: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer < 1 {
            return Err(Error::InvalidParameter("max_outer must be at least 1".into()));
        }
        if !(3..=30).contains(&self.lbfgs_memory) {
            return Err(Error::InvalidParameter(format!(
                "lbfgs_memory must lie in [3, 30], got {}",
                self.lbfgs_memory
            )));
        }
        if !(self.grad_stop >= 0.0) {
            return Err(Error::InvalidParameter("grad_stop must be nonnegative".into()));
        }
        if let Some(b) = self.step_beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("step_beta must be positive, got {b}")));
            }
        }
        if !(self.schedule.c > 0.0) || self.schedule.floor < 0.0 {
            return Err(Error::InvalidParameter("schedule constants must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            lbfgs_memory: 2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_outer: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("gd-inexact".parse::<Method>().unwrap(), Method::GdInexact);
        assert!("newton".parse::<Method>().is_err());
    }
}
