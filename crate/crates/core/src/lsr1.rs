//! Limited-memory SR1 in compact form.
//!
//! With `S`, `Y` the stored step/gradient-difference pairs (as columns) and
//! `B0 = tau0 * I`,
//!
//! ```text
//! B = B0 + U V U^T,   U = Y - B0 S,   V = (D + L + L^T - S^T B0 S)^{-1}
//! ```
//!
//! where `S^T Y = L + D + R` (strictly lower, diagonal, strictly upper). The
//! small core is rebuilt from scratch after every accepted pair.

use std::collections::VecDeque;

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problems::check_dim;

/// Cores with reciprocal condition number below this are treated as singular.
const MIN_CORE_RCOND: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Lsr1State {
    dim: usize,
    tau0: f64,
    memory: usize,
    skip_r: f64,
    s: VecDeque<DVector<f64>>,
    y: VecDeque<DVector<f64>>,
    cache: Option<CompactFactors>,
}

#[derive(Debug, Clone)]
struct CompactFactors {
    u: DMatrix<f64>,
    core: DMatrix<f64>,
    core_inv: DMatrix<f64>,
}

impl Lsr1State {
    pub fn new(dim: usize, tau0: f64, memory: usize, skip_r: f64) -> Result<Self> {
        if !(tau0 > 0.0) {
            return Err(Error::Config(format!("tau0 must be positive, got {tau0}")));
        }
        if memory == 0 {
            return Err(Error::Config("L-SR1 memory must be at least 1".into()));
        }
        if !(skip_r > 0.0 && skip_r < 1.0) {
            return Err(Error::Config(format!("skip threshold r must lie in (0, 1), got {skip_r}")));
        }
        Ok(Self { dim, tau0, memory, skip_r, s: VecDeque::new(), y: VecDeque::new(), cache: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> {
        self.s.iter().zip(&self.y)
    }

    /// `U` and `V` of the compact form, or `None` when the memory is empty.
    pub fn compact_factors(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        self.cache.as_ref().map(|c| (&c.u, &c.core_inv))
    }

    /// The core `M = D + L + L^T - tau0 S^T S` (so `V = M^{-1}`).
    pub fn core(&self) -> Option<&DMatrix<f64>> {
        self.cache.as_ref().map(|c| &c.core)
    }

    /// `B v` without forming `B`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, v.len())?;
        let mut out = v * self.tau0;
        if let Some(c) = &self.cache {
            let coef = &c.core_inv * (c.u.transpose() * v);
            out.gemv(1.0, &c.u, &coef, 1.0);
        }
        Ok(out)
    }

    /// Materializes `B`. Intended for tests and small dimensions.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut b = DMatrix::identity(self.dim, self.dim) * self.tau0;
        if let Some(c) = &self.cache {
            b += &c.u * &c.core_inv * c.u.transpose();
        }
        b
    }

    /// Offers the pair `(s, y)`. It is stored only if `w = y - B s` satisfies
    /// `|s^T w| >= r ||s|| ||w||` with `w != 0`; the oldest pair is evicted
    /// once the memory is full. Returns whether the pair was stored.
    pub fn try_update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> Result<bool> {
        check_dim(self.dim, s.len())?;
        check_dim(self.dim, y.len())?;
        let w = y - self.apply(s)?;
        let w_norm = w.norm();
        let s_norm = s.norm();
        if w_norm == 0.0 || s_norm == 0.0 || s.dot(&w).abs() < self.skip_r * s_norm * w_norm {
            return Ok(false);
        }

        let saved = (self.s.clone(), self.y.clone(), self.cache.take());
        self.s.push_back(s.clone());
        self.y.push_back(y.clone());
        if self.s.len() > self.memory {
            self.s.pop_front();
            self.y.pop_front();
        }
        match self.rebuild() {
            Ok(()) => Ok(true),
            Err(Error::SingularCore) => {
                debug!("L-SR1 pair rejected: core matrix became singular after the update");
                (self.s, self.y, self.cache) = saved;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    fn rebuild(&mut self) -> Result<()> {
        let k = self.s.len();
        if k == 0 {
            self.cache = None;
            return Ok(());
        }
        let s = DMatrix::from_columns(&self.s.iter().cloned().collect::<Vec<_>>());
        let y = DMatrix::from_columns(&self.y.iter().cloned().collect::<Vec<_>>());
        let sty = s.transpose() * &y;
        let sts = s.transpose() * &s;
        // D + L + L^T - tau0 S^T S, with L the strictly lower part of S^T Y
        let core = DMatrix::from_fn(k, k, |i, j| {
            let lower = if i >= j { sty[(i, j)] } else { sty[(j, i)] };
            lower - self.tau0 * sts[(i, j)]
        });
        let sv = core.clone().singular_values();
        let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(smax > 0.0) || smin / smax < MIN_CORE_RCOND {
            return Err(Error::SingularCore);
        }
        debug!("L-SR1 core rebuilt: {k} pairs, condition number {:.3e}", smax / smin);
        let core_inv = core.clone().try_inverse().ok_or(Error::SingularCore)?;
        let u = y - s * self.tau0;
        self.cache = Some(CompactFactors { u, core, core_inv });
        Ok(())
    }
}
