use log::debug;
use nalgebra::{DMatrix, DVector};

use super::{cauchy_point, check_inputs, TrsSolution, TrsStatus};
use crate::error::Result;
use crate::model::Curvature;

/// Powell's dogleg for a positive definite `B`.
///
/// Takes the Newton step when it fits, the truncated steepest-descent step
/// when even the Cauchy point lies outside, and otherwise the point where the
/// segment from the Cauchy point to the Newton point crosses the boundary.
/// A `B` without a Cholesky factorization yields the Cauchy point with
/// [`TrsStatus::CauchyFallback`].
pub fn dogleg(g: &DVector<f64>, b: &DMatrix<f64>, delta: f64) -> Result<TrsSolution> {
    let gnorm = check_inputs(g, delta)?;
    let curv = Curvature::Dense(b.clone());
    let Some(chol) = b.clone().cholesky() else {
        debug!("dogleg: model Hessian is not positive definite, using the Cauchy point");
        let mut s = cauchy_point(g, &curv, delta)?;
        s.status = TrsStatus::CauchyFallback;
        return Ok(s);
    };

    let newton = -chol.solve(g);
    if newton.norm() <= delta {
        return TrsSolution::new(g, &curv, newton, 0.0, TrsStatus::Interior);
    }

    let gbg = g.dot(&(b * g));
    let cauchy = g * -(g.norm_squared() / gbg);
    let cauchy_norm = cauchy.norm();
    if cauchy_norm >= delta {
        return TrsSolution::new(g, &curv, g * (-delta / gnorm), 0.0, TrsStatus::Boundary);
    }

    // ||u + t p|| = delta for t in [0, 1]
    let p = &newton - &cauchy;
    let a = p.norm_squared();
    let half_b = cauchy.dot(&p);
    let c = cauchy_norm * cauchy_norm - delta * delta;
    let t = (-half_b + (half_b * half_b - a * c).max(0.0).sqrt()) / a;
    TrsSolution::new(g, &curv, cauchy + p * t.clamp(0.0, 1.0), 0.0, TrsStatus::Boundary)
}
