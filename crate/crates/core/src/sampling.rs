//! Sample-average models and function estimates with adaptive batch sizes.

use std::sync::Arc;

use nalgebra::DVector;
use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lsr1::Lsr1State;
use crate::model::{Curvature, QuadraticModel};
use crate::parallel::Execution;
use crate::problems::{Batch, ComponentOracle};

/// Relative distance to the nearest integer below which a real batch size is
/// taken to be that integer before rounding up. Keeps `1/(1 - 0.9)` at 10.
const CEIL_SNAP: f64 = 1e-9;

/// `ceil(x)` that ignores floating-point excess just above an integer and
/// saturates at `u64::MAX`.
pub fn snapped_ceil(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        return 0;
    }
    if x >= u64::MAX as f64 {
        return u64::MAX;
    }
    let r = x.round();
    if (x - r).abs() <= CEIL_SNAP * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Parameters of the probabilistic accuracy requirements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyParams {
    pub kappa_ef: f64,
    pub kappa_eg: f64,
    pub eps_f: f64,
    pub alpha: f64,
    pub beta: f64,
    pub v_f: f64,
    pub v_g: f64,
}

impl AccuracyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("kappa_ef", self.kappa_ef), ("kappa_eg", self.kappa_eg), ("eps_f", self.eps_f)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        for (name, v) in [("v_f", self.v_f), ("v_g", self.v_g)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Chebyshev sample sizes `(p, q)` for the model and the estimates at radius `delta`.
///
/// With `alpha' = sqrt(alpha)`:
/// `p = ceil(max(V_f / ((1 - alpha') k_ef^2 delta^4), V_g / ((1 - alpha') k_eg^2 delta^2)))`
/// and `q = ceil(V_f / ((1 - beta) eps_F^2 delta^4))`, both at least 1.
pub fn chebyshev_sizes(acc: &AccuracyParams, delta: f64) -> Result<(u64, u64)> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveRadius(delta));
    }
    let a = 1.0 - acc.alpha.sqrt();
    let d2 = delta * delta;
    let d4 = d2 * d2;
    let p_f = acc.v_f / (a * acc.kappa_ef * acc.kappa_ef * d4);
    let p_g = acc.v_g / (a * acc.kappa_eg * acc.kappa_eg * d2);
    let q = acc.v_f / ((1.0 - acc.beta) * acc.eps_f * acc.eps_f * d4);
    Ok((snapped_ceil(p_f.max(p_g)).max(1), snapped_ceil(q).max(1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchMode {
    /// `b_k = min(b_max, max(t0 k + b0, ceil(1/delta^2)))` for both model and estimates.
    LinearDelta,
    /// The linear floor `t0 k + b0`, raised to the Chebyshev sizes.
    Chebyshev(AccuracyParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSchedule {
    pub t0: u64,
    pub b0: u64,
    pub b_max: u64,
    pub mode: BatchMode,
}

impl BatchSchedule {
    pub fn linear(t0: u64, b0: u64, b_max: u64) -> Self {
        Self { t0, b0, b_max, mode: BatchMode::LinearDelta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b0 < 1 || self.b0 > self.b_max {
            return Err(Error::Config(format!("need 1 <= b0 <= b_max, got b0={} b_max={}", self.b0, self.b_max)));
        }
        if let BatchMode::Chebyshev(acc) = &self.mode {
            acc.validate()?;
        }
        Ok(())
    }

    fn floor(&self, k: u64) -> u64 {
        self.t0.saturating_mul(k).saturating_add(self.b0)
    }

    /// Model batch size at iteration `k` and radius `delta`.
    pub fn model_size(&self, k: u64, delta: f64) -> Result<u64> {
        let need = match &self.mode {
            BatchMode::LinearDelta => delta_size(delta)?,
            BatchMode::Chebyshev(acc) => chebyshev_sizes(acc, delta)?.0,
        };
        Ok(self.floor(k).max(need).min(self.b_max))
    }

    /// Estimate batch size at iteration `k` and radius `delta`.
    pub fn estimate_size(&self, k: u64, delta: f64) -> Result<u64> {
        let need = match &self.mode {
            BatchMode::LinearDelta => delta_size(delta)?,
            BatchMode::Chebyshev(acc) => chebyshev_sizes(acc, delta)?.1,
        };
        Ok(self.floor(k).max(need).min(self.b_max))
    }
}

fn delta_size(delta: f64) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveRadius(delta));
    }
    Ok(snapped_ceil(1.0 / (delta * delta)))
}

/// `min(b_max, max(t0 k + b0, ceil(1/delta^2)))`.
pub fn batch_size(k: u64, delta: f64, sched: &BatchSchedule) -> Result<u64> {
    BatchSchedule { mode: BatchMode::LinearDelta, ..*sched }.model_size(k, delta)
}

/// `b` distinct indices drawn uniformly from `0..n`.
pub fn sample_indices<R: RngCore + ?Sized>(n: usize, b: usize, rng: &mut R) -> Result<Vec<usize>> {
    if b > n {
        return Err(Error::BatchTooLarge { batch: b as u64, population: n as u64 });
    }
    if b == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    Ok(index::sample(rng, n, b).into_vec())
}

/// A batch of `b` samples: a uniform subset for finite sums, an aggregate
/// draw for unbounded sample streams.
pub fn draw_batch<R: RngCore + ?Sized>(population: Option<usize>, b: u64, rng: &mut R) -> Result<Batch> {
    match population {
        Some(n) => {
            let b = usize::try_from(b).map_err(|_| Error::BatchTooLarge { batch: b, population: n as u64 })?;
            sample_indices(n, b, rng).map(Batch::Indices)
        }
        None if b == 0 => Err(Error::Config("batch size must be at least 1".into())),
        None => Ok(Batch::Draw { size: b, key: rng.next_u64() }),
    }
}

/// `b` explicit sample keys for an unbounded sample stream.
pub fn draw_keys<R: RngCore + ?Sized>(b: usize, rng: &mut R) -> Batch {
    Batch::Indices((0..b).map(|_| rng.next_u64() as usize).collect())
}

/// Independent random streams derived from one root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Model = 1,
    Estimate = 2,
    Init = 3,
    Noise = 4,
    WarmStart = 5,
    Split = 6,
    Data = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Hessian part of a sampled model.
#[derive(Debug, Clone)]
pub enum ModelOrder {
    First,
    /// Mean of the component Hessians over the model batch.
    SampledHessian,
    /// A quasi-Newton approximation carried between iterations.
    Memory(Arc<Lsr1State>),
}

/// Sample-average model at `x`. Charges `|batch|` to `sfo`.
pub fn build_model<P: ComponentOracle + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    batch: &Batch,
    order: &ModelOrder,
    exec: Execution,
    sfo: &mut u64,
) -> Result<QuadraticModel> {
    let g = problem.mean_grad(x, batch, exec)?;
    let curvature = match order {
        ModelOrder::First => Curvature::Zero,
        ModelOrder::SampledHessian => Curvature::Dense(problem.mean_hessian(x, batch, exec)?),
        ModelOrder::Memory(st) => Curvature::Lsr1(Arc::clone(st)),
    };
    *sfo = sfo.saturating_add(batch.len());
    Ok(QuadraticModel::new(g, curvature))
}

/// Function-value estimates at the current and trial points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatePair {
    pub f0: f64,
    pub fd: f64,
    pub q_used: u64,
}

/// Where the estimate batch comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatePolicy {
    /// Reuse the model batch.
    SharedBatch,
    /// Draw a fresh batch, shared by both estimates.
    Resample,
}

/// Means of the component values over `batch` at `x` and `x_trial`.
/// Function values are not charged to the gradient budget.
pub fn estimate_pair<P: ComponentOracle + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    x_trial: &DVector<f64>,
    batch: &Batch,
    exec: Execution,
) -> Result<EstimatePair> {
    let f0 = problem.mean_value(x, batch, exec)?;
    let fd = problem.mean_value(x_trial, batch, exec)?;
    Ok(EstimatePair { f0, fd, q_used: batch.len() })
}
