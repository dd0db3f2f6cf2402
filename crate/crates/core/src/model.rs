use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::lsr1::Lsr1State;
use crate::problems::check_dim;

/// Hessian approximation of a quadratic model.
#[derive(Debug, Clone)]
pub enum Curvature {
    Zero,
    Dense(DMatrix<f64>),
    Lsr1(Arc<Lsr1State>),
}

impl Curvature {
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Curvature::Zero => Ok(DVector::zeros(v.len())),
            Curvature::Dense(b) => {
                check_dim(b.ncols(), v.len())?;
                Ok(b * v)
            }
            Curvature::Lsr1(st) => st.apply(v),
        }
    }

    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            Curvature::Zero => DMatrix::zeros(dim, dim),
            Curvature::Dense(b) => b.clone(),
            Curvature::Lsr1(st) => st.to_dense(),
        }
    }
}

/// `m(x + d) = f + g^T d + (1/2) d^T B d`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub g: DVector<f64>,
    pub curvature: Curvature,
    pub f0: Option<f64>,
}

impl QuadraticModel {
    pub fn new(g: DVector<f64>, curvature: Curvature) -> Self {
        Self { g, curvature, f0: None }
    }

    pub fn first_order(g: DVector<f64>) -> Self {
        Self::new(g, Curvature::Zero)
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `m(x) - m(x + d)`.
    pub fn pred_reduction(&self, d: &DVector<f64>) -> Result<f64> {
        check_dim(self.g.len(), d.len())?;
        let bd = self.curvature.apply(d)?;
        Ok(-(self.g.dot(d) + 0.5 * d.dot(&bd)))
    }

    /// `m(x + d) - m(x)`.
    pub fn value_change(&self, d: &DVector<f64>) -> Result<f64> {
        self.pred_reduction(d).map(|p| -p)
    }
}

/// Free-function form of [`QuadraticModel::pred_reduction`].
pub fn pred_reduction(model: &QuadraticModel, d: &DVector<f64>) -> Result<f64> {
    model.pred_reduction(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn linear_model_reduction() {
        let m = QuadraticModel::first_order(v(&[1.0, 0.0]));
        assert_eq!(m.pred_reduction(&v(&[-1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn identity_curvature_reduction() {
        let m = QuadraticModel::new(v(&[2.0, 0.0]), Curvature::Dense(DMatrix::identity(2, 2)));
        assert_eq!(m.pred_reduction(&v(&[-2.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn matches_explicit_quadratic_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut r = || rng.random_range(-1.0..1.0);
        let a = DMatrix::from_fn(5, 5, |_, _| r());
        let b = &a + a.transpose();
        let g = DVector::from_fn(5, |_, _| r());
        let x = DVector::from_fn(5, |_, _| r());
        let d = DVector::from_fn(5, |_, _| r());
        let f0 = r();
        // m(z) = f0 + g^T (z - x) + (1/2)(z - x)^T B (z - x), evaluated at z = x and z = x + d
        let m_at = |z: &DVector<f64>| {
            let dz = z - &x;
            f0 + g.dot(&dz) + 0.5 * dz.dot(&(&b * &dz))
        };
        let expected = m_at(&x) - m_at(&(&x + &d));
        let got = QuadraticModel::new(g.clone(), Curvature::Dense(b.clone())).pred_reduction(&d).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = QuadraticModel::first_order(v(&[1.0, 0.0]));
        assert!(m.pred_reduction(&v(&[1.0])).is_err());
    }
}
