//! Trust-region subproblem solvers: minimize `g^T d + (1/2) d^T B d` over `||d|| <= delta`.

mod cauchy;
mod dogleg;
mod exact;

pub use cauchy::cauchy_point;
pub use dogleg::dogleg;
pub use exact::{dense_trs_oracle, lsr1_trs};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{Curvature, QuadraticModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrsStatus {
    Interior,
    Boundary,
    HardCase,
    /// The primary solver failed and the Cauchy point was returned instead.
    CauchyFallback,
}

#[derive(Debug, Clone)]
pub struct TrsSolution {
    pub d: DVector<f64>,
    /// `m(0) - m(d)`.
    pub pred: f64,
    /// Boundary multiplier; meaningful for the exact solvers only.
    pub lambda: f64,
    pub status: TrsStatus,
}

impl TrsSolution {
    fn new(g: &DVector<f64>, b: &Curvature, d: DVector<f64>, lambda: f64, status: TrsStatus) -> Result<Self> {
        let pred = model_for(g, b).pred_reduction(&d)?;
        Ok(Self { d, pred, lambda, status })
    }

    /// Model value change `m(d) - m(0)`.
    pub fn model_value(&self) -> f64 {
        -self.pred
    }
}

fn model_for(g: &DVector<f64>, b: &Curvature) -> QuadraticModel {
    QuadraticModel::new(g.clone(), b.clone())
}

fn check_inputs(g: &DVector<f64>, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveRadius(delta));
    }
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(gnorm)
}

/// Constants of the sufficient-decrease analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// Cauchy-decrease constant in `(0, 1]`.
    pub kappa_fcd: f64,
    /// Bound on `||B_k||`; only reported, never enforced.
    pub kappa_bhm: f64,
}

impl Default for TheoryConstants {
    fn default() -> Self {
        Self { kappa_fcd: 0.5, kappa_bhm: f64::INFINITY }
    }
}

/// Upper estimate of `||B||` by power iteration started at `g`.
///
/// For symmetric `B` the ratios `||B^{k+1} g|| / ||B^k g||` are nondecreasing,
/// so the running maximum dominates the Rayleigh quotient at `g`, which is
/// what the Cauchy-point bound needs.
pub fn operator_norm_estimate(b: &Curvature, g: &DVector<f64>, iters: usize) -> Result<f64> {
    let mut v = g.normalize();
    let mut best = 0.0f64;
    for _ in 0..iters {
        let bv = b.apply(&v)?;
        let n = bv.norm();
        best = best.max(n);
        if n == 0.0 {
            break;
        }
        v = bv / n;
    }
    Ok(best)
}

/// Whether `d` achieves `(kappa_fcd / 2) ||g|| min(||g|| / ||B||, delta)` model decrease.
pub fn check_cauchy_decrease(
    g: &DVector<f64>,
    b: &Curvature,
    delta: f64,
    d: &DVector<f64>,
    tc: &TheoryConstants,
) -> Result<bool> {
    let pred = model_for(g, b).pred_reduction(d)?;
    let gnorm = g.norm();
    let bnorm = operator_norm_estimate(b, g, 20)?;
    let reach = if bnorm > 0.0 { (gnorm / bnorm).min(delta) } else { delta };
    Ok(pred >= 0.5 * tc.kappa_fcd * gnorm * reach)
}

/// Residuals of the global optimality conditions for a dense `B`.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    /// `||(B + lambda I) d + g|| / max(1, ||g||)`
    pub stationarity: f64,
    /// `max(0, ||d|| - delta) / delta`
    pub infeasibility: f64,
    /// `lambda |delta - ||d||| / max(1, lambda delta)`
    pub complementarity: f64,
    /// `max(0, -lambda)`
    pub negative_multiplier: f64,
    /// `max(0, -(lambda_min(B) + lambda)) / max(1, ||B||)`
    pub indefiniteness: f64,
}

impl KktReport {
    pub fn new(g: &DVector<f64>, b: &DMatrix<f64>, delta: f64, sol: &TrsSolution) -> Self {
        let n = g.len();
        let shifted = b + DMatrix::identity(n, n) * sol.lambda;
        let dn = sol.d.norm();
        let eig = SymmetricEigen::new(b.clone()).eigenvalues;
        let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let bnorm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self {
            stationarity: (shifted * &sol.d + g).norm() / g.norm().max(1.0),
            infeasibility: (dn - delta).max(0.0) / delta,
            complementarity: sol.lambda * (delta - dn).abs() / (sol.lambda * delta).max(1.0),
            negative_multiplier: (-sol.lambda).max(0.0),
            indefiniteness: (-(lmin + sol.lambda)).max(0.0) / bnorm.max(1.0),
        }
    }

    pub fn max_residual(&self) -> f64 {
        [self.stationarity, self.infeasibility, self.complementarity, self.negative_multiplier, self.indefiniteness]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}
