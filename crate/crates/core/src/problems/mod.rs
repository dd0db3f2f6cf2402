//! Objectives exposed through a per-sample oracle.
//!
//! An objective is `f(x) = E[f(x; xi)]`. Finite-sum problems (logistic
//! regression, the MLP) have `n` components and `f = (1/n) sum_i f_i`;
//! synthetic problems draw an unbounded stream of i.i.d. noisy samples.
//! Either way the sampling layer sees a [`Batch`] and asks for batch means.

mod logistic;
mod mlp;
mod synthetic;

pub use logistic::LogisticProblem;
pub use mlp::{Mlp, MlpArchitecture, MNIST_ARCHITECTURE};
pub use synthetic::{SyntheticBase, SyntheticProblem};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::parallel::Execution;

/// A set of samples drawn for one model or estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Batch {
    /// Explicit sample indices (component ids, or noise keys for unbounded problems).
    Indices(Vec<usize>),
    /// `size` i.i.d. samples identified by `key`. Only problems that can
    /// evaluate the batch mean in closed form accept this variant.
    Draw { size: u64, key: u64 },
}

impl Batch {
    pub fn len(&self) -> u64 {
        match self {
            Batch::Indices(ix) => ix.len() as u64,
            Batch::Draw { size, .. } => *size,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-sample access to a stochastic objective.
///
/// Implementors provide the data term of each component; an optional
/// `(l2/2)||x||^2` regularizer is added once per mean rather than once per
/// sample.
pub trait ComponentOracle: Sync {
    fn dim(&self) -> usize;

    /// Number of components for finite sums, `None` for an unbounded sample stream.
    fn num_components(&self) -> Option<usize>;

    fn l2(&self) -> f64 {
        0.0
    }

    fn data_value(&self, i: usize, x: &DVector<f64>) -> f64;

    /// Adds the data-term gradient of component `i` to `out`.
    fn add_data_grad(&self, i: usize, x: &DVector<f64>, out: &mut DVector<f64>);

    /// Adds the data-term Hessian of component `i` to `out`.
    fn add_data_hessian(&self, _i: usize, _x: &DVector<f64>, _out: &mut DMatrix<f64>) -> Result<()> {
        Err(Error::Unsupported("component Hessian"))
    }

    fn data_hess_vec(&self, _i: usize, _x: &DVector<f64>, _v: &DVector<f64>) -> Result<DVector<f64>> {
        Err(Error::Unsupported("component Hessian-vector product"))
    }

    fn component_value(&self, i: usize, x: &DVector<f64>) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.data_value(i, x) + 0.5 * self.l2() * x.norm_squared())
    }

    fn component_grad(&self, i: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_index(i)?;
        let mut g = DVector::zeros(self.dim());
        self.add_data_grad(i, x, &mut g);
        g.axpy(self.l2(), x, 1.0);
        Ok(g)
    }

    fn component_hess_vec(&self, i: usize, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_index(i)?;
        let mut hv = self.data_hess_vec(i, x, v)?;
        hv.axpy(self.l2(), v, 1.0);
        Ok(hv)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        match self.num_components() {
            Some(n) if i >= n => Err(Error::IndexOutOfRange { index: i, count: n }),
            _ => Ok(()),
        }
    }

    /// Mean component value over `batch`.
    fn mean_value(&self, x: &DVector<f64>, batch: &Batch, exec: Execution) -> Result<f64> {
        let ix = indices_of(self, batch)?;
        let sum = exec.chunked_fold(ix, || 0.0, |acc, &i| *acc += self.data_value(i, x), |a, b| *a += b).unwrap_or(0.0);
        let v = sum / ix.len() as f64 + 0.5 * self.l2() * x.norm_squared();
        finite(v, "function value")
    }

    /// Mean component gradient over `batch`.
    fn mean_grad(&self, x: &DVector<f64>, batch: &Batch, exec: Execution) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let ix = indices_of(self, batch)?;
        let d = self.dim();
        let mut g = exec
            .chunked_fold(ix, || DVector::zeros(d), |acc, &i| self.add_data_grad(i, x, acc), |a, b| *a += b)
            .unwrap_or_else(|| DVector::zeros(d));
        g /= ix.len() as f64;
        g.axpy(self.l2(), x, 1.0);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite("gradient"))
        }
    }

    /// Mean component Hessian over `batch`, as a dense matrix.
    fn mean_hessian(&self, x: &DVector<f64>, batch: &Batch, exec: Execution) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        let ix = indices_of(self, batch)?;
        let d = self.dim();
        let mut h = exec
            .chunked_fold(
                ix,
                || (DMatrix::zeros(d, d), Ok(())),
                |acc: &mut (DMatrix<f64>, Result<()>), &i| {
                    if acc.1.is_ok() {
                        acc.1 = self.add_data_hessian(i, x, &mut acc.0);
                    }
                },
                |a, b| {
                    if a.1.is_ok() {
                        a.1 = b.1;
                    }
                    a.0 += b.0;
                },
            )
            .map(|(h, r)| r.map(|_| h))
            .unwrap_or_else(|| Ok(DMatrix::zeros(d, d)))?;
        h /= ix.len() as f64;
        for j in 0..d {
            h[(j, j)] += self.l2();
        }
        if h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Error::NonFinite("Hessian"))
        }
    }

    /// The true objective value (exact for synthetic problems, full mean for finite sums).
    fn full_value(&self, x: &DVector<f64>) -> f64;

    fn full_grad(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Full-population mean value of a finite-sum problem.
pub fn finite_sum_value<P: ComponentOracle + ?Sized>(p: &P, x: &DVector<f64>, exec: Execution) -> Result<f64> {
    let n = p.num_components().ok_or(Error::Unsupported("full pass over an unbounded population"))?;
    p.mean_value(x, &Batch::Indices((0..n).collect()), exec)
}

pub fn finite_sum_grad<P: ComponentOracle + ?Sized>(p: &P, x: &DVector<f64>, exec: Execution) -> Result<DVector<f64>> {
    let n = p.num_components().ok_or(Error::Unsupported("full pass over an unbounded population"))?;
    p.mean_grad(x, &Batch::Indices((0..n).collect()), exec)
}

fn indices_of<'a, P: ComponentOracle + ?Sized>(p: &P, batch: &'a Batch) -> Result<&'a [usize]> {
    match batch {
        Batch::Indices(ix) if ix.is_empty() => Err(Error::Config("empty batch".into())),
        Batch::Indices(ix) => {
            if let Some(n) = p.num_components() {
                if let Some(&bad) = ix.iter().find(|&&i| i >= n) {
                    return Err(Error::IndexOutOfRange { index: bad, count: n });
                }
            }
            Ok(ix)
        }
        Batch::Draw { .. } => Err(Error::Unsupported("aggregate batch draws")),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Numerically stable `log(1 + exp(t))`.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
