//! The interval `(α, β)`, piecewise polynomials on it, and modulars.

pub mod piecewise;
pub mod quadrature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use piecewise::{PiecewiseError, PiecewiseFunction};
pub use quadrature::{integrate, integrate_split, QuadratureConfig, QuadratureError, Scheme};

use crate::mo_function::MusielakOrlicz;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("interval ({alpha}, {beta}) must be finite with alpha < beta")]
    BadInterval { alpha: f64, beta: f64 },
    #[error("quadrature tolerance must be positive")]
    BadTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl Domain {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, DomainError> {
        Domain::with_quadrature(alpha, beta, QuadratureConfig::default())
    }

    pub fn with_quadrature(alpha: f64, beta: f64, quadrature: QuadratureConfig) -> Result<Self, DomainError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(DomainError::BadInterval { alpha, beta });
        }
        if !(quadrature.abs_tol > 0.0) || quadrature.order == 0 {
            return Err(DomainError::BadTolerance);
        }
        Ok(Domain { alpha, beta, quadrature })
    }

    pub fn unit() -> Self {
        Domain::new(0.0, 1.0).expect("unit interval")
    }

    pub fn length(&self) -> f64 {
        self.beta - self.alpha
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.alpha && x <= self.beta
    }

    /// Midpoints of `n` equal cells.
    pub fn midpoints(&self, n: usize) -> Vec<f64> {
        let h = self.length() / n as f64;
        (0..n).map(|i| self.alpha + h * (i as f64 + 0.5)).collect()
    }

    /// `∫_α^β g`, split at the given points.
    pub fn integrate(&self, g: &dyn Fn(f64) -> f64, splits: &[f64]) -> Result<f64, QuadratureError> {
        integrate_split(g, self.alpha, self.beta, splits, &self.quadrature)
    }
}

/// `I_Φ(scale·f) = ∫ Φ(x, scale·|f(x)|) dx`.
///
/// Cells are integrated separately, further split at the singular points of
/// `Φ`; cells where `f` vanishes identically contribute nothing.
pub fn modular(phi: &dyn MusielakOrlicz, f: &PiecewiseFunction, scale: f64) -> Result<f64, QuadratureError> {
    let dom = phi.domain();
    let cfg = dom.quadrature;
    let total = dom.length();
    let sing = phi.singularities();
    let mut sum = 0.0;
    let mut err_acc = 0.0;
    let mut failed = false;
    for (a, b, c) in f.cell_iter() {
        if c.iter().all(|&k| k == 0.0) {
            continue;
        }
        let g = |x: f64| {
            let s = x - a;
            let v = c.iter().rev().fold(0.0, |acc, &k| acc * s + k);
            phi.value(x, scale * v.abs())
        };
        let mut cell_cfg = cfg;
        cell_cfg.abs_tol = cfg.abs_tol * ((b - a) / total).max(1e-3);
        match integrate_split(&g, a, b, sing, &cell_cfg) {
            Ok(v) => sum += v,
            Err(QuadratureError::NoConvergence { partial, error }) => {
                sum += partial;
                err_acc += error;
                failed = true;
            }
            Err(e) => return Err(e),
        }
        if sum == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
    }
    if failed {
        return Err(QuadratureError::NoConvergence { partial: sum, error: err_acc });
    }
    Ok(sum)
}
