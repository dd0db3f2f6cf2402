//! Diagonal AdaGrad on sampled gradients.

use std::ops::ControlFlow;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::problems::ComponentOracle;
use crate::sampling::{draw_batch, stream_rng, Stream};

/// `accum += g*g`, then `x -= eta g / (sqrt(accum) + eps)` elementwise.
///
/// Coordinates whose accumulator is still zero are left in place.
pub fn adagrad_step(x: &mut DVector<f64>, g: &DVector<f64>, accum: &mut DVector<f64>, eta: f64, eps: f64) {
    for i in 0..x.len() {
        accum[i] += g[i] * g[i];
        let denom = accum[i].sqrt() + eps;
        if denom > 0.0 {
            x[i] -= eta * g[i] / denom;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaGradConfig {
    pub eta: f64,
    pub eps: f64,
    pub batch: u64,
    pub sfo_max: u64,
    pub seed: u64,
    pub max_iter: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradRecord {
    pub k: u64,
    pub grad_norm: f64,
    pub batch_size: u64,
    pub sfo: u64,
}

#[derive(Debug, Clone)]
pub struct AdaGradOutcome {
    pub x: DVector<f64>,
    pub sfo_count: u64,
    pub trace: Vec<AdaGradRecord>,
}

/// Runs minibatch AdaGrad until the gradient budget is spent. Batches come
/// from the model stream, as in the trust-region driver.
pub fn run_adagrad<P, F>(
    problem: &P,
    x0: DVector<f64>,
    cfg: &AdaGradConfig,
    exec: Execution,
    mut observer: F,
) -> Result<AdaGradOutcome>
where
    P: ComponentOracle + ?Sized,
    F: FnMut(&DVector<f64>, &AdaGradRecord) -> ControlFlow<()>,
{
    if !(cfg.eta > 0.0) || !(cfg.eps >= 0.0) || cfg.batch == 0 {
        return Err(Error::Config(format!(
            "AdaGrad needs eta > 0, eps >= 0 and a positive batch, got eta={} eps={} batch={}",
            cfg.eta, cfg.eps, cfg.batch
        )));
    }
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let mut rng = stream_rng(cfg.seed, Stream::Model);
    let mut x = x0;
    let mut accum = DVector::zeros(x.len());
    let mut sfo = 0u64;
    let mut trace = Vec::new();
    let mut k = 0u64;
    while sfo < cfg.sfo_max && cfg.max_iter.is_none_or(|m| k < m) {
        let batch = draw_batch(problem.num_components(), cfg.batch, &mut rng)?;
        let g = problem.mean_grad(&x, &batch, exec)?;
        sfo = sfo.saturating_add(batch.len());
        adagrad_step(&mut x, &g, &mut accum, cfg.eta, cfg.eps);
        let rec = AdaGradRecord { k, grad_norm: g.norm(), batch_size: batch.len(), sfo };
        k += 1;
        let flow = observer(&x, &rec);
        trace.push(rec);
        if flow.is_break() {
            break;
        }
    }
    Ok(AdaGradOutcome { x, sfo_count: sfo, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SyntheticProblem;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn first_step_moves_by_eta() {
        let (mut x, mut acc) = (v(&[5.0]), v(&[0.0]));
        adagrad_step(&mut x, &v(&[3.0]), &mut acc, 1.0, 0.0);
        assert_eq!(x[0], 4.0);
        assert_eq!(acc[0], 9.0);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut x, mut acc) = (v(&[1.0, -2.0]), v(&[4.0, 0.0]));
        adagrad_step(&mut x, &v(&[0.0, 0.0]), &mut acc, 1.0, 1e-8);
        assert_eq!(x, v(&[1.0, -2.0]));
        assert_eq!(acc, v(&[4.0, 0.0]));
        adagrad_step(&mut x, &v(&[0.0, 0.0]), &mut acc, 1.0, 0.0);
        assert_eq!(x, v(&[1.0, -2.0]));
    }

    #[test]
    fn two_unit_steps() {
        let (mut x, mut acc) = (v(&[0.0]), v(&[0.0]));
        adagrad_step(&mut x, &v(&[1.0]), &mut acc, 1.0, 0.0);
        adagrad_step(&mut x, &v(&[1.0]), &mut acc, 1.0, 0.0);
        let want = -(1.0 + 1.0 / 2f64.sqrt());
        assert!((x[0] - want).abs() < 1e-15);
    }

    #[test]
    fn runner_respects_budget_and_descends() {
        let p = SyntheticProblem::quadratic(nalgebra::DMatrix::identity(3, 3), v(&[1.0, -1.0, 0.5])).unwrap();
        let cfg = AdaGradConfig { eta: 0.5, eps: 1e-8, batch: 4, sfo_max: 400, seed: 3, max_iter: None };
        let out =
            run_adagrad(&p, DVector::zeros(3), &cfg, Execution::Sequential, |_, _| ControlFlow::Continue(())).unwrap();
        assert_eq!(out.sfo_count, 400);
        assert_eq!(out.trace.len(), 100);
        assert!(p.base_value(&out.x) < p.base_value(&DVector::zeros(3)));
    }
}
