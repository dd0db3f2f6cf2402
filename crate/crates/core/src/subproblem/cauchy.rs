use nalgebra::DVector;

use super::{check_inputs, TrsSolution, TrsStatus};
use crate::error::Result;
use crate::model::Curvature;

/// Minimizer of the model along `-g` within the region.
///
/// With nonpositive curvature along `g`, or when the unconstrained minimizer
/// along `-g` leaves the region, the step is `-delta g / ||g||`.
pub fn cauchy_point(g: &DVector<f64>, b: &Curvature, delta: f64) -> Result<TrsSolution> {
    let gnorm = check_inputs(g, delta)?;
    let gbg = g.dot(&b.apply(g)?);
    if gbg > 0.0 {
        let t = g.norm_squared() / gbg;
        if t * gnorm <= delta {
            return TrsSolution::new(g, b, g * -t, 0.0, TrsStatus::Interior);
        }
    }
    TrsSolution::new(g, b, g * (-delta / gnorm), 0.0, TrsStatus::Boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subproblem::{check_cauchy_decrease, TheoryConstants};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn close(a: &DVector<f64>, b: &[f64]) -> bool {
        (a - v(b)).norm() < 1e-14
    }

    #[test]
    fn unit_curvature_interior() {
        let s = cauchy_point(&v(&[2.0, 0.0]), &Curvature::Dense(DMatrix::identity(2, 2)), 10.0).unwrap();
        assert!(close(&s.d, &[-2.0, 0.0]));
        assert_eq!(s.status, TrsStatus::Interior);
    }

    #[test]
    fn truncated_to_boundary() {
        let s = cauchy_point(&v(&[3.0, 4.0]), &Curvature::Dense(DMatrix::identity(2, 2)), 2.5).unwrap();
        assert!(close(&s.d, &[-1.5, -2.0]));
        assert_eq!(s.status, TrsStatus::Boundary);
    }

    #[test]
    fn negative_curvature_goes_to_boundary() {
        let b = Curvature::Dense(DMatrix::from_diagonal(&v(&[-1.0, 1.0])));
        let s = cauchy_point(&v(&[1.0, 0.0]), &b, 1.0).unwrap();
        assert!(close(&s.d, &[-1.0, 0.0]));
        // 1-D oracle: m(-t e1) = -t - t^2/2 on [0, 1] is minimized at t = 1
        let m = |t: f64| -t - 0.5 * t * t;
        let best = (0..=1000).map(|i| m(i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        assert!((s.model_value() - best).abs() < 1e-12);
    }

    #[test]
    fn zero_curvature_is_linear_step() {
        let s = cauchy_point(&v(&[0.0, -2.0]), &Curvature::Zero, 0.5).unwrap();
        assert!(close(&s.d, &[0.0, 0.5]));
        assert!((s.pred - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_gradient_and_radius() {
        assert!(cauchy_point(&v(&[0.0, 0.0]), &Curvature::Zero, 1.0).is_err());
        assert!(cauchy_point(&v(&[1.0, 0.0]), &Curvature::Zero, 0.0).is_err());
    }

    #[test]
    fn always_meets_textbook_bound() {
        let tc = TheoryConstants { kappa_fcd: 1.0, kappa_bhm: f64::INFINITY };
        for (b, delta) in [
            (DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, -2.0]), 0.3),
            (DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]), 30.0),
            (DMatrix::zeros(2, 2), 2.0),
        ] {
            let g = v(&[0.7, -1.3]);
            let c = Curvature::Dense(b);
            let s = cauchy_point(&g, &c, delta).unwrap();
            assert!(check_cauchy_decrease(&g, &c, delta, &s.d, &tc).unwrap());
        }
    }
}
