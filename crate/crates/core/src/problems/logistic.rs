use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{finite_sum_grad, finite_sum_value, sigmoid, softplus, ComponentOracle};
use crate::data::SparseDataset;
use crate::error::Result;
use crate::parallel::Execution;

/// `f(x) = (1/n) sum_i log(1 + exp(-b_i a_i^T x)) + (lambda/2) ||x||^2`.
///
/// Labels `> 0` map to `b_i = +1`, everything else to `-1`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    data: SparseDataset,
    signs: Vec<f64>,
    lambda: f64,
}

impl LogisticProblem {
    pub fn new(data: SparseDataset, lambda: f64) -> Self {
        let signs = data.labels().iter().map(|&l| if l > 0 { 1.0 } else { -1.0 }).collect();
        Self { data, signs, lambda }
    }

    pub fn data(&self) -> &SparseDataset {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn margin(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.signs[i] * self.data.dot(i, x.as_slice())
    }

    /// Value, gradient and a Hessian-vector closure for component `i`.
    #[allow(clippy::type_complexity)]
    pub fn eval(
        &self,
        i: usize,
        x: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>, impl Fn(&DVector<f64>) -> DVector<f64> + '_)> {
        let value = self.component_value(i, x)?;
        let grad = self.component_grad(i, x)?;
        let z = self.margin(i, x);
        let w = sigmoid(z) * (1.0 - sigmoid(z));
        let hv = move |v: &DVector<f64>| {
            let mut out = v * self.lambda;
            let (ix, a) = self.data.row(i);
            let av = self.data.dot(i, v.as_slice());
            for (&j, &aj) in ix.iter().zip(a) {
                out[j] += w * av * aj;
            }
            out
        };
        Ok((value, grad, hv))
    }

    /// Fraction of rows whose sign of `a_i^T x` matches the label (ties count as +1).
    pub fn accuracy(&self, x: &DVector<f64>) -> f64 {
        let correct = (0..self.data.len())
            .filter(|&i| {
                let pred = if self.data.dot(i, x.as_slice()) >= 0.0 { 1.0 } else { -1.0 };
                pred == self.signs[i]
            })
            .count();
        correct as f64 / self.data.len() as f64
    }

    /// Synthetic data: sparse Gaussian rows (`density` of entries present) and
    /// labels drawn from a logistic model around a hidden weight vector.
    pub fn synthetic_dataset(n: usize, d: usize, density: f64, seed: u64) -> SparseDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut ds = SparseDataset::new(d);
        let mut row = Vec::new();
        for _ in 0..n {
            row.clear();
            for j in 0..d {
                if rng.random::<f64>() < density {
                    row.push((j, rng.sample::<f64, _>(StandardNormal)));
                }
            }
            let z: f64 = row.iter().map(|&(j, v)| truth[j] * v).sum();
            let label = if rng.random::<f64>() < sigmoid(z) { 1 } else { -1 };
            ds.push_row(label, &row);
        }
        ds
    }
}

impl ComponentOracle for LogisticProblem {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn num_components(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn l2(&self) -> f64 {
        self.lambda
    }

    fn data_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        softplus(-self.margin(i, x))
    }

    fn add_data_grad(&self, i: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        let z = self.margin(i, x);
        let coef = -self.signs[i] * sigmoid(-z);
        let (ix, a) = self.data.row(i);
        for (&j, &aj) in ix.iter().zip(a) {
            out[j] += coef * aj;
        }
    }

    fn add_data_hessian(&self, i: usize, x: &DVector<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        let s = sigmoid(self.margin(i, x));
        let w = s * (1.0 - s);
        let (ix, a) = self.data.row(i);
        for (&j, &aj) in ix.iter().zip(a) {
            for (&l, &al) in ix.iter().zip(a) {
                out[(j, l)] += w * aj * al;
            }
        }
        Ok(())
    }

    fn data_hess_vec(&self, i: usize, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let s = sigmoid(self.margin(i, x));
        let w = s * (1.0 - s) * self.data.dot(i, v.as_slice());
        let mut out = DVector::zeros(self.dim());
        let (ix, a) = self.data.row(i);
        for (&j, &aj) in ix.iter().zip(a) {
            out[j] += w * aj;
        }
        Ok(out)
    }

    fn full_value(&self, x: &DVector<f64>) -> f64 {
        finite_sum_value(self, x, Execution::default()).unwrap_or(f64::NAN)
    }

    fn full_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        finite_sum_grad(self, x, Execution::default()).unwrap_or_else(|_| DVector::from_element(self.dim(), f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::problems::Batch;

    fn tiny() -> LogisticProblem {
        let mut ds = SparseDataset::new(3);
        ds.push_row(1, &[(0, 1.0), (2, -0.5)]);
        ds.push_row(-1, &[(1, 2.0)]);
        ds.push_row(1, &[(0, -0.3), (1, 0.4), (2, 1.5)]);
        ds.push_row(-1, &[]);
        LogisticProblem::new(ds, 0.1)
    }

    #[test]
    fn value_at_origin_is_ln2() {
        let p = tiny();
        let x = DVector::zeros(3);
        assert!((p.full_value(&x) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_origin_is_half_mean_signed_rows() {
        let p = tiny();
        let g = p.full_grad(&DVector::zeros(3));
        // (1/n) sum -b_i a_i / 2
        let expected =
            [(-1.0 - 1.0 * -0.3) / 8.0, (-(-1.0) * 2.0 - 1.0 * 0.4) / 8.0, (-(1.0) * -0.5 - 1.0 * 1.5) / 8.0];
        for j in 0..3 {
            assert!((g[j] - expected[j]).abs() < 1e-15, "{j}: {} vs {}", g[j], expected[j]);
        }
    }

    #[test]
    fn hessian_matches_hess_vec() {
        let p = tiny();
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let h = p.mean_hessian(&x, &Batch::Indices(vec![0, 1, 2, 3]), Execution::Sequential).unwrap();
        let mut hv = DVector::zeros(3);
        for i in 0..4 {
            hv += p.component_hess_vec(i, &x, &v).unwrap();
        }
        hv /= 4.0;
        assert!((h * &v - hv).norm() < 1e-14);
    }

    #[test]
    fn eval_bundles_value_grad_and_hess_vec() {
        let p = tiny();
        let x = DVector::from_vec(vec![0.2, 0.1, -0.4]);
        let (value, grad, hv) = p.eval(2, &x).unwrap();
        assert_eq!(value, p.component_value(2, &x).unwrap());
        assert_eq!(grad, p.component_grad(2, &x).unwrap());
        let v = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        assert!((hv(&v) - p.component_hess_vec(2, &x, &v).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let p = tiny();
        let x = DVector::zeros(3);
        assert!(matches!(p.component_value(4, &x), Err(Error::IndexOutOfRange { index: 4, count: 4 })));
        assert!(p.mean_grad(&x, &Batch::Indices(vec![0, 9]), Execution::Sequential).is_err());
    }

    #[test]
    fn extreme_margins_stay_finite() {
        let p = tiny();
        let x = DVector::from_vec(vec![1e4, -1e4, 1e4]);
        assert!(p.full_value(&x).is_finite());
        assert!(p.full_grad(&x).iter().all(|v| v.is_finite()));
    }
}
