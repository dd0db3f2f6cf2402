use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_dim, Batch, ComponentOracle};
use crate::error::{Error, Result};
use crate::parallel::Execution;

const VALUE_SALT: u64 = 0x5bd1_e995_0000_0001;
const GRAD_SALT: u64 = 0x5bd1_e995_0000_0002;
const MEAN_VALUE_SALT: u64 = 0x5bd1_e995_0000_0003;
const MEAN_GRAD_SALT: u64 = 0x5bd1_e995_0000_0004;

#[derive(Debug, Clone)]
pub enum SyntheticBase {
    /// `(1/2) x^T Q x + c^T x`
    Quadratic { q: DMatrix<f64>, c: DVector<f64> },
    /// `(1 - x)^2 + 100 (y - x^2)^2`
    Rosenbrock,
}

/// A smooth base function observed through additive Gaussian noise.
///
/// Each sample key carries an independent value perturbation with variance
/// `v_f` and a gradient perturbation with total variance `v_g` (split evenly
/// over coordinates). The Hessian is observed without noise. Noise is a pure
/// function of `(noise_seed, key)`, so a shared batch sees the same
/// perturbation at every point.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    base: SyntheticBase,
    v_f: f64,
    v_g: f64,
    noise_seed: u64,
}

impl SyntheticProblem {
    pub fn quadratic(q: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        check_dim(q.nrows(), c.len())?;
        check_dim(q.nrows(), q.ncols())?;
        Ok(Self::noise_free(SyntheticBase::Quadratic { q, c }))
    }

    /// Random rotation of a diagonal with eigenvalues log-spaced in `[1, condition]`,
    /// with a random linear term.
    pub fn quadratic_with_condition(dim: usize, condition: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rot = raw.qr().q();
        let eig =
            DVector::from_fn(dim, |i, _| if dim == 1 { 1.0 } else { condition.powf(i as f64 / (dim - 1) as f64) });
        let q = &rot * DMatrix::from_diagonal(&eig) * rot.transpose();
        let q = (&q + q.transpose()) * 0.5;
        let c = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::noise_free(SyntheticBase::Quadratic { q, c })
    }

    pub fn rosenbrock() -> Self {
        Self::noise_free(SyntheticBase::Rosenbrock)
    }

    fn noise_free(base: SyntheticBase) -> Self {
        Self { base, v_f: 0.0, v_g: 0.0, noise_seed: 0 }
    }

    pub fn with_noise(mut self, v_f: f64, v_g: f64, noise_seed: u64) -> Self {
        assert!(v_f >= 0.0 && v_g >= 0.0, "noise variances must be nonnegative");
        self.v_f = v_f;
        self.v_g = v_g;
        self.noise_seed = noise_seed;
        self
    }

    pub fn base(&self) -> &SyntheticBase {
        &self.base
    }

    pub fn value_variance(&self) -> f64 {
        self.v_f
    }

    pub fn grad_variance(&self) -> f64 {
        self.v_g
    }

    pub fn base_value(&self, x: &DVector<f64>) -> f64 {
        match &self.base {
            SyntheticBase::Quadratic { q, c } => 0.5 * x.dot(&(q * x)) + c.dot(x),
            SyntheticBase::Rosenbrock => {
                let (a, b) = (x[0], x[1]);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            }
        }
    }

    pub fn base_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.base {
            SyntheticBase::Quadratic { q, c } => q * x + c,
            SyntheticBase::Rosenbrock => {
                let (a, b) = (x[0], x[1]);
                DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
            }
        }
    }

    pub fn base_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.base {
            SyntheticBase::Quadratic { q, .. } => q.clone(),
            SyntheticBase::Rosenbrock => {
                let (a, b) = (x[0], x[1]);
                let off = -400.0 * a;
                DMatrix::from_row_slice(2, 2, &[2.0 - 400.0 * (b - 3.0 * a * a), off, off, 200.0])
            }
        }
    }

    /// Minimizer, when the base has a unique one.
    pub fn minimizer(&self) -> Option<DVector<f64>> {
        match &self.base {
            SyntheticBase::Quadratic { q, c } => q.clone().cholesky().map(|ch| -ch.solve(c)),
            SyntheticBase::Rosenbrock => Some(DVector::from_vec(vec![1.0, 1.0])),
        }
    }

    pub fn f_star(&self) -> Option<f64> {
        self.minimizer().map(|x| self.base_value(&x))
    }

    /// Gradient Lipschitz constant for quadratics (largest |eigenvalue| of Q).
    pub fn lipschitz(&self) -> Option<f64> {
        match &self.base {
            SyntheticBase::Quadratic { q, .. } => {
                Some(SymmetricEigen::new(q.clone()).eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            }
            SyntheticBase::Rosenbrock => None,
        }
    }

    /// One noisy observation with a fresh key drawn from `rng`.
    pub fn sample<R: RngCore>(&self, x: &DVector<f64>, rng: &mut R) -> (f64, DVector<f64>) {
        let key = rng.next_u64() as usize;
        let mut g = self.base_grad(x);
        self.add_grad_noise(key as u64, GRAD_SALT, 1.0, &mut g);
        (self.base_value(x) + self.value_noise(key as u64, VALUE_SALT, 1.0), g)
    }

    fn noise_rng(&self, salt: u64, key: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed ^ salt);
        rng.set_stream(key);
        rng
    }

    fn value_noise(&self, key: u64, salt: u64, count: f64) -> f64 {
        if self.v_f == 0.0 {
            return 0.0;
        }
        let z: f64 = self.noise_rng(salt, key).sample(StandardNormal);
        z * (self.v_f / count).sqrt()
    }

    fn add_grad_noise(&self, key: u64, salt: u64, count: f64, out: &mut DVector<f64>) {
        if self.v_g == 0.0 {
            return;
        }
        let sd = (self.v_g / (self.dim() as f64 * count)).sqrt();
        let mut rng = self.noise_rng(salt, key);
        for v in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
    }
}

impl ComponentOracle for SyntheticProblem {
    fn dim(&self) -> usize {
        match &self.base {
            SyntheticBase::Quadratic { c, .. } => c.len(),
            SyntheticBase::Rosenbrock => 2,
        }
    }

    fn num_components(&self) -> Option<usize> {
        None
    }

    fn data_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.base_value(x) + self.value_noise(i as u64, VALUE_SALT, 1.0)
    }

    fn add_data_grad(&self, i: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        *out += self.base_grad(x);
        self.add_grad_noise(i as u64, GRAD_SALT, 1.0, out);
    }

    fn add_data_hessian(&self, _i: usize, x: &DVector<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        *out += self.base_hessian(x);
        Ok(())
    }

    fn data_hess_vec(&self, _i: usize, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.base_hessian(x) * v)
    }

    fn mean_value(&self, x: &DVector<f64>, batch: &Batch, exec: Execution) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let noise = match batch {
            Batch::Draw { size: 0, .. } => return Err(Error::Config("empty batch".into())),
            Batch::Draw { size, key } => self.value_noise(*key, MEAN_VALUE_SALT, *size as f64),
            Batch::Indices(ix) if ix.is_empty() => return Err(Error::Config("empty batch".into())),
            Batch::Indices(ix) => {
                let sum = exec
                    .chunked_fold(ix, || 0.0, |a, &i| *a += self.value_noise(i as u64, VALUE_SALT, 1.0), |a, b| *a += b)
                    .unwrap_or(0.0);
                sum / ix.len() as f64
            }
        };
        Ok(self.base_value(x) + noise)
    }

    fn mean_grad(&self, x: &DVector<f64>, batch: &Batch, exec: Execution) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let noise = match batch {
            Batch::Draw { size: 0, .. } => return Err(Error::Config("empty batch".into())),
            Batch::Draw { size, key } => {
                let mut n = DVector::zeros(d);
                self.add_grad_noise(*key, MEAN_GRAD_SALT, *size as f64, &mut n);
                n
            }
            Batch::Indices(ix) if ix.is_empty() => return Err(Error::Config("empty batch".into())),
            Batch::Indices(ix) => {
                let sum = exec
                    .chunked_fold(
                        ix,
                        || DVector::zeros(d),
                        |a, &i| self.add_grad_noise(i as u64, GRAD_SALT, 1.0, a),
                        |a, b| *a += b,
                    )
                    .unwrap_or_else(|| DVector::zeros(d));
                sum / ix.len() as f64
            }
        };
        Ok(self.base_grad(x) + noise)
    }

    fn mean_hessian(&self, x: &DVector<f64>, batch: &Batch, _exec: Execution) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        Ok(self.base_hessian(x))
    }

    fn full_value(&self, x: &DVector<f64>) -> f64 {
        self.base_value(x)
    }

    fn full_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.base_grad(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_matches_base() {
        let p = SyntheticProblem::rosenbrock();
        let x = DVector::from_vec(vec![-1.2, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (v, g) = p.sample(&x, &mut rng);
        assert_eq!(v, p.base_value(&x));
        assert_eq!(g, p.base_grad(&x));
        assert!((p.base_value(&x) - 24.2).abs() < 1e-12);
    }

    #[test]
    fn conditioned_quadratic_has_requested_spectrum() {
        let p = SyntheticProblem::quadratic_with_condition(10, 100.0, 7);
        let SyntheticBase::Quadratic { q, .. } = p.base() else { unreachable!() };
        let eig = SymmetricEigen::new(q.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 100.0).abs() < 1e-9);
        let xs = p.minimizer().unwrap();
        assert!(p.base_grad(&xs).norm() < 1e-10);
        assert!((p.lipschitz().unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_hessian_matches_gradient_differences() {
        let p = SyntheticProblem::rosenbrock();
        let x = DVector::from_vec(vec![0.3, -0.4]);
        let h = p.base_hessian(&x);
        let eps = 1e-6;
        for j in 0..2 {
            let mut e = DVector::zeros(2);
            e[j] = eps;
            let col = (p.base_grad(&(&x + &e)) - p.base_grad(&(&x - &e))) / (2.0 * eps);
            assert!((col - h.column(j)).norm() < 1e-5 * h.norm());
        }
    }

    #[test]
    fn shared_keys_repeat_noise() {
        let p = SyntheticProblem::rosenbrock().with_noise(1.0, 1.0, 11);
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let y = DVector::from_vec(vec![0.5, 0.1]);
        let b = Batch::Indices(vec![4, 8, 15]);
        let e = Execution::Sequential;
        let nx = p.mean_value(&x, &b, e).unwrap() - p.base_value(&x);
        let ny = p.mean_value(&y, &b, e).unwrap() - p.base_value(&y);
        assert!((nx - ny).abs() < 1e-12);
        assert!(nx.abs() > 0.0);
        let d = Batch::Draw { size: 10, key: 99 };
        assert_eq!(p.mean_value(&x, &d, e).unwrap(), p.mean_value(&x, &d, e).unwrap());
    }

    #[test]
    fn empty_batches_rejected() {
        let p = SyntheticProblem::rosenbrock().with_noise(1.0, 1.0, 1);
        let x = DVector::zeros(2);
        assert!(p.mean_value(&x, &Batch::Indices(vec![]), Execution::Sequential).is_err());
        assert!(p.mean_grad(&x, &Batch::Draw { size: 0, key: 1 }, Execution::Sequential).is_err());
    }
}
