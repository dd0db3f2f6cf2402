//! Progress measures computed alongside a run: `Phi`, the success/failure ratio
//! and stopping times.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    /// Weight of the suboptimality term, in `(0, 1)`.
    pub nu: f64,
    /// Gradient Lipschitz estimate.
    pub l_smooth: f64,
    pub f_star: f64,
}

impl DiagnosticsConfig {
    pub fn new(nu: f64, l_smooth: f64, f_star: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {nu}")));
        }
        if !(l_smooth > 0.0 && l_smooth.is_finite()) {
            return Err(Error::Config(format!("l_smooth must be positive, got {l_smooth}")));
        }
        if !f_star.is_finite() {
            return Err(Error::Config("f_star must be finite".into()));
        }
        Ok(Self { nu, l_smooth, f_star })
    }
}

/// `nu (f - f*) + (1 - nu) mu ||grad f||^2 / L^2`, with the true gradient norm.
pub fn compute_phi(diag: &DiagnosticsConfig, f_val: f64, mu: f64, grad_norm: f64) -> f64 {
    diag.nu * (f_val - diag.f_star) + (1.0 - diag.nu) * mu * grad_norm * grad_norm / (diag.l_smooth * diag.l_smooth)
}

/// Successes divided by failures; `+inf` when nothing failed.
pub fn success_fail_ratio(success: &[bool]) -> f64 {
    let wins = success.iter().filter(|&&s| s).count();
    ratio_of(wins, success.len() - wins)
}

/// The ratio over every prefix of `success`.
pub fn running_success_fail_ratio(success: &[bool]) -> Vec<f64> {
    let mut wins = 0;
    success
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            wins += usize::from(s);
            ratio_of(wins, i + 1 - wins)
        })
        .collect()
}

fn ratio_of(wins: usize, losses: usize) -> f64 {
    if losses == 0 {
        f64::INFINITY
    } else {
        wins as f64 / losses as f64
    }
}

/// A full (unsampled) evaluation at the iterate after `k` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticPoint {
    pub k: u64,
    pub f_val: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingCriterion {
    GradNorm { eps: f64 },
    Suboptimality { f_star: f64, eps: f64 },
}

impl StoppingCriterion {
    pub fn met(&self, p: &DiagnosticPoint) -> bool {
        match *self {
            StoppingCriterion::GradNorm { eps } => p.grad_norm <= eps,
            StoppingCriterion::Suboptimality { f_star, eps } => p.f_val - f_star <= eps,
        }
    }
}

/// Iteration index of the first point meeting the criterion.
pub fn measure_stopping_time(points: &[DiagnosticPoint], criterion: StoppingCriterion) -> Option<u64> {
    points.iter().find(|p| criterion.met(p)).map(|p| p.k)
}
