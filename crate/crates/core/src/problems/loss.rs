//! Scalar penalties applied componentwise to scaled residuals.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LeastSquares,
    Huber,
    SmoothedHuber,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub kappa: f64,
    pub eps: f64,
}

impl LossSpec {
    pub fn least_squares() -> Self {
        Self {
            kind: LossKind::LeastSquares,
            kappa: f64::INFINITY,
            eps: 0.0,
        }
    }

    pub fn huber(kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self {
            kind: LossKind::Huber,
            kappa,
            eps: 0.0,
        })
    }

    /// Huber with a `C²` blend on `[κ−ε, κ+ε]`.
    pub fn smoothed_huber(kappa: f64, eps: f64) -> Result<Self> {
        check_kappa(kappa)?;
        if !(eps > 0.0 && eps < kappa) {
            return Err(Error::InvalidParameter(format!(
                "smoothing width must lie in (0, kappa), got {eps}"
            )));
        }
        Ok(Self {
            kind: LossKind::SmoothedHuber,
            kappa,
            eps,
        })
    }

    /// Whether the loss has a continuous second derivative.
    pub fn is_c2(&self) -> bool {
        self.kind != LossKind::Huber
    }

    pub fn is_quadratic(&self) -> bool {
        self.kind == LossKind::LeastSquares
    }

    pub fn value(&self, r: f64) -> f64 {
        let a = r.abs();
        match self.kind {
            LossKind::LeastSquares => 0.5 * r * r,
            LossKind::Huber if a <= self.kappa => 0.5 * r * r,
            LossKind::Huber => self.kappa * a - 0.5 * self.kappa * self.kappa,
            LossKind::SmoothedHuber => {
                let (lo, hi) = (self.kappa - self.eps, self.kappa + self.eps);
                if a <= lo {
                    0.5 * r * r
                } else if a >= hi {
                    self.kappa * a - 0.5 * self.kappa * self.kappa - 0.1 * self.eps * self.eps
                } else {
                    let w = 2.0 * self.eps;
                    let s = a - lo;
                    let t = s / w;
                    0.5 * lo * lo + lo * s + 0.5 * s * s - w * w * (t.powi(4) / 4.0 - t.powi(5) / 10.0)
                }
            }
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let a = r.abs();
        match self.kind {
            LossKind::LeastSquares => r,
            LossKind::Huber => r.clamp(-self.kappa, self.kappa),
            LossKind::SmoothedHuber => {
                let (lo, hi) = (self.kappa - self.eps, self.kappa + self.eps);
                if a <= lo {
                    r
                } else if a >= hi {
                    self.kappa * r.signum()
                } else {
                    let w = 2.0 * self.eps;
                    let s = a - lo;
                    let t = s / w;
                    r.signum() * (lo + s - w * (t.powi(3) - t.powi(4) / 2.0))
                }
            }
        }
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        let a = r.abs();
        match self.kind {
            LossKind::LeastSquares => 1.0,
            LossKind::Huber => {
                if a <= self.kappa {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::SmoothedHuber => {
                let (lo, hi) = (self.kappa - self.eps, self.kappa + self.eps);
                if a <= lo {
                    1.0
                } else if a >= hi {
                    0.0
                } else {
                    let t = (a - lo) / (2.0 * self.eps);
                    1.0 - 3.0 * t * t + 2.0 * t * t * t
                }
            }
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("huber threshold must be positive, got {kappa}")))
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::LeastSquares => f.write_str("ls"),
            LossKind::Huber => write!(f, "huber({})", self.kappa),
            LossKind::SmoothedHuber => write!(f, "smoothed_huber({}, {})", self.kappa, self.eps),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" | "l2" | "least_squares" => Ok(Self::LeastSquares),
            "huber" => Ok(Self::Huber),
            "smoothed_huber" | "smoothed-huber" => Ok(Self::SmoothedHuber),
            other => Err(Error::InvalidParameter(format!("unknown loss `{other}`"))),
        }
    }
}

/// Summed loss and its componentwise gradient.
pub fn loss_eval(spec: &LossSpec, r: &[f64]) -> (f64, Vec<f64>) {
    let value = r.iter().map(|v| spec.value(*v)).sum();
    (value, r.iter().map(|v| spec.derivative(*v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_branches() {
        let h = LossSpec::huber(0.1).unwrap();
        assert!((h.value(0.05) - 0.00125).abs() < 1e-16);
        assert!((h.derivative(0.05) - 0.05).abs() < 1e-16);
        assert!((h.value(1.0) - 0.095).abs() < 1e-15);
        assert_eq!(h.derivative(1.0), 0.1);
        assert_eq!(h.derivative(-1.0), -0.1);
        let (v, g) = loss_eval(&h, &[0.05, -1.0]);
        assert!((v - 0.09625).abs() < 1e-15);
        assert_eq!(g, vec![0.05, -0.1]);
    }

    #[test]
    fn least_squares() {
        let (v, g) = loss_eval(&LossSpec::least_squares(), &[3.0, -1.0]);
        assert_eq!(v, 5.0);
        assert_eq!(g, vec![3.0, -1.0]);
    }

    #[test]
    fn smoothed_close_to_huber() {
        let h = LossSpec::huber(0.1).unwrap();
        let s = LossSpec::smoothed_huber(0.1, 0.01).unwrap();
        let worst = (-20_000..=20_000)
            .map(|i| i as f64 * 1e-4)
            .map(|r| (s.value(r) - h.value(r)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn smoothed_derivatives_consistent_and_continuous() {
        let s = LossSpec::smoothed_huber(0.1, 0.01).unwrap();
        let h = 1e-6;
        for i in -3000..=3000 {
            let r = i as f64 * 1e-4 + 3.3e-6;
            let fd1 = (s.value(r + h) - s.value(r - h)) / (2.0 * h);
            assert!((fd1 - s.derivative(r)).abs() < 1e-8, "r={r}");
            let fd2 = (s.derivative(r + h) - s.derivative(r - h)) / (2.0 * h);
            assert!((fd2 - s.second_derivative(r)).abs() < 1e-4, "r={r}");
        }
        // second derivative has no jump across the blend endpoints or ±κ
        for r in [0.09, 0.1, 0.11, -0.09, -0.1, -0.11] {
            let jump = (s.second_derivative(r + 1e-9) - s.second_derivative(r - 1e-9)).abs();
            assert!(jump < 1e-6, "jump {jump} at {r}");
        }
        let plain = LossSpec::huber(0.1).unwrap();
        let jump = plain.second_derivative(0.1 + 1e-9) - plain.second_derivative(0.1 - 1e-9);
        assert_eq!(jump, -1.0);
        assert!(!plain.is_c2() && s.is_c2());
    }

    #[test]
    fn invalid_parameters() {
        assert!(LossSpec::huber(0.0).is_err());
        assert!(LossSpec::smoothed_huber(0.1, 0.2).is_err());
        assert_eq!("huber".parse::<LossKind>().unwrap(), LossKind::Huber);
        assert!("cauchy".parse::<LossKind>().is_err());
    }
}
