use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("conjugate gradient breakdown: non-finite value at iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("power iteration failed: {0}")]
    PowerIteration(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inner solve did not converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    InnerNotConverged {
        grad_norm: f64,
        iterations: usize,
        best: Box<crate::penalty::InnerSolveResult>,
    },

    #[error("inner solve result is not converged")]
    UnconvergedInput,

    #[error("problem has no second-order information")]
    MissingSecondOrder,

    #[error("dense assembly cap exceeded: dimension {dim} > {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("non-finite objective at outer iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("outer solver failed at iteration {iteration}: {source}")]
    Outer {
        iteration: usize,
        #[source]
        source: Box<Error>,
        trace: Box<crate::solvers::OuterTrace>,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}
