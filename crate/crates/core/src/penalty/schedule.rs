/// How the inner accuracy evolves with the outer iteration counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Fixed,
    OneOverK,
}

/// Inner tolerance schedule: `c` in fixed mode, `max(floor, c/(kλ‖G‖))` in 1/k mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSchedule {
    pub c: f64,
    pub mode: ScheduleMode,
    pub floor: f64,
}

impl ToleranceSchedule {
    pub fn fixed(c: f64) -> Self {
        Self {
            c,
            mode: ScheduleMode::Fixed,
            floor: 0.0,
        }
    }

    pub fn one_over_k(c: f64, floor: f64) -> Self {
        Self {
            c,
            mode: ScheduleMode::OneOverK,
            floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTolerance {
    /// Target distance `‖y − y_u‖`.
    pub y_tol: f64,
    /// Equivalent bound on `‖∇_y φ‖` through strong convexity.
    pub grad_tol: f64,
}

/// Inner accuracy at outer iteration `k ≥ 1`.
///
/// The y-distance target is converted to a gradient bound with the strong
/// convexity modulus `λ σ_min(A_u)²` of `φ(u, ·)`.
pub fn inner_tolerance(
    s: &ToleranceSchedule,
    k: usize,
    lambda: f64,
    g_norm_estimate: f64,
    sigma_min: f64,
) -> InnerTolerance {
    let k = k.max(1) as f64;
    let y_tol = match s.mode {
        ScheduleMode::Fixed => s.c.max(s.floor),
        ScheduleMode::OneOverK => (s.c / (k * lambda * g_norm_estimate)).max(s.floor),
    };
    InnerTolerance {
        y_tol,
        grad_tol: y_tol * lambda * sigma_min * sigma_min,
    }
}
