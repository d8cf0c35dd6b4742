/// Why an outer run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm reached the requested threshold.
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iter",
            Termination::LineSearchFailed => "line_search_failed",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One outer iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Starts at 1 for the initial point.
    pub k: usize,
    pub u: Vec<f64>,
    pub objective: f64,
    /// Norm of the (possibly inexact) gradient `v_k`.
    pub grad_norm: f64,
    /// Inner CG iterations spent on this outer iteration.
    pub inner_iterations: usize,
    pub cumulative_inner: usize,
    /// `min_{i≤k} ‖v_i‖²`
    pub min_grad_sq: f64,
    pub wall_seconds: f64,
    /// Certified upper bound on `H(u_{k+1}) − H(u_k)` for fixed-step descent,
    /// when a bound on the gradient error is available.
    pub descent_bound: Option<f64>,
    /// Bound on `‖v_k − ∇H(u_k)‖` backing `descent_bound`.
    pub gradient_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    /// Inverse step size used by fixed-step descent.
    pub beta: Option<f64>,
}

impl OuterTrace {
    pub(crate) fn new() -> Self {
        Self {
            records: Vec::new(),
            termination: Termination::MaxIterations,
            beta: None,
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_u(&self) -> &[f64] {
        self.records.last().map(|r| r.u.as_slice()).unwrap_or(&[])
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_inner(&self) -> usize {
        self.records.last().map_or(0, |r| r.cumulative_inner)
    }

    pub(crate) fn push(
        &mut self,
        u: &[f64],
        objective: f64,
        grad_norm: f64,
        inner_iterations: usize,
        wall_seconds: f64,
    ) -> &mut TraceRecord {
        let (k, cumulative, min_sq) = match self.records.last() {
            Some(r) => (r.k + 1, r.cumulative_inner, r.min_grad_sq),
            None => (1, 0, f64::INFINITY),
        };
        self.records.push(TraceRecord {
            k,
            u: u.to_vec(),
            objective,
            grad_norm,
            inner_iterations,
            cumulative_inner: cumulative + inner_iterations,
            min_grad_sq: min_sq.min(grad_norm * grad_norm),
            wall_seconds,
            descent_bound: None,
            gradient_error: None,
        });
        self.records.last_mut().unwrap()
    }
}
