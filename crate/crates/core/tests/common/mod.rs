//! Helpers shared by the integration suites.
#![allow(dead_code)]

use nalgebra::DVector;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stochtr::parallel::Execution;
use stochtr::problems::{Batch, ComponentOracle};

/// Parameters of the classical first-order stochastic trust-region loop.
#[derive(Debug, Clone, Copy)]
pub struct StormParams {
    pub delta0: f64,
    pub delta_max: f64,
    pub gamma: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub t0: u64,
    pub b0: u64,
    pub b_max: u64,
    pub seed: u64,
    pub iterations: usize,
}

/// Iterates and radii `(x_k, delta_k)` of a from-scratch first-order loop with
/// radius `delta_k` and the gradient test `||g|| >= eta2 delta`, estimates on
/// the model batch. Batches are drawn from a ChaCha8 generator on stream 1.
pub fn reference_storm<P: ComponentOracle + ?Sized>(
    p: &P,
    x0: DVector<f64>,
    c: &StormParams,
) -> Vec<(DVector<f64>, f64)> {
    let n = p.num_components().expect("finite-sum problem");
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    rng.set_stream(1);
    let (mut x, mut delta) = (x0, c.delta0);
    let mut out = Vec::new();
    for k in 0..c.iterations as u64 {
        out.push((x.clone(), delta));
        let need = (1.0 / (delta * delta)).ceil() as u64;
        let b = (c.t0 * k + c.b0).max(need).min(c.b_max) as usize;
        let batch = Batch::Indices(index::sample(&mut rng, n, b).into_vec());
        let g = p.mean_grad(&x, &batch, Execution::Sequential).unwrap();
        let gn = g.norm();
        let d = &g * (-delta / gn);
        let pred = -g.dot(&d);
        let f0 = p.mean_value(&x, &batch, Execution::Sequential).unwrap();
        let fd = p.mean_value(&(&x + &d), &batch, Execution::Sequential).unwrap();
        let rho = (f0 - fd) / pred;
        if rho >= c.eta1 && gn >= c.eta2 * delta {
            x += d;
            delta = (c.gamma * delta).min(c.delta_max);
        } else {
            delta /= c.gamma;
        }
    }
    out
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    let slope = sxy / sxx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    1.0 - sse / syy
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
