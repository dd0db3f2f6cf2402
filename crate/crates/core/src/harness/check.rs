//! Runtime self-checks: solver oracles, quasi-Newton fidelity, derivative
//! consistency, estimate coverage and determinism.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::driver::{run, Method, ModelKind, OptConfig, RadiusRule};
use crate::error::Result;
use crate::lsr1::Lsr1State;
use crate::parallel::Execution;
use crate::problems::{Batch, ComponentOracle, LogisticProblem, Mlp, MlpArchitecture, SyntheticProblem};
use crate::sampling::{chebyshev_sizes, draw_keys, AccuracyParams, BatchSchedule, EstimatePolicy};
use crate::subproblem::{dense_trs_oracle, lsr1_trs, KktReport};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// A random L-SR1 state with up to `pairs` stored pairs.
fn random_lsr1(rng: &mut ChaCha8Rng, dim: usize, pairs: usize) -> Result<Lsr1State> {
    let mut st = Lsr1State::new(dim, rng.random_range(0.1..3.0), pairs.max(1), 1e-8)?;
    let a = {
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&m + m.transpose()) * 0.5
    };
    for _ in 0..pairs {
        let s = gaussian(rng, dim);
        let y = &a * &s;
        st.try_update(&s, &y)?;
    }
    Ok(st)
}

fn trs_oracle(instances: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_gap, mut worst_kkt) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let dim = rng.random_range(2..=10);
        let pairs = rng.random_range(0..=dim.min(5));
        let st = random_lsr1(&mut rng, dim, pairs)?;
        let g = gaussian(&mut rng, dim);
        let delta = 10f64.powf(rng.random_range(-1.5..1.0));
        let b = st.to_dense();
        let fast = lsr1_trs(&g, &st, delta)?;
        let slow = dense_trs_oracle(&g, &b, delta)?;
        worst_gap = worst_gap.max((fast.model_value() - slow.model_value()).abs());
        worst_kkt = worst_kkt.max(KktReport::new(&g, &b, delta, &fast).max_residual());
    }
    Ok(CheckResult {
        name: "subproblem oracle",
        passed: worst_gap <= 1e-6 && worst_kkt <= 1e-8,
        detail: format!("{instances} instances, max model gap {worst_gap:.2e}, max KKT residual {worst_kkt:.2e}"),
    })
}

fn lsr1_recursion(sequences: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let dim = 10;
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    for _ in 0..sequences {
        let mut st = Lsr1State::new(dim, 1.0, 20, 1e-8)?;
        let mut dense = DMatrix::identity(dim, dim);
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = (&a + a.transpose()) * 0.5;
        for _ in 0..20 {
            let s = gaussian(&mut rng, dim);
            let y = &a * &s + gaussian(&mut rng, dim) * 0.1;
            let w = &y - &dense * &s;
            let keep = w.norm() > 0.0 && s.dot(&w).abs() >= 1e-8 * s.norm() * w.norm();
            if keep {
                dense += &w * w.transpose() / s.dot(&w);
            }
            if st.try_update(&s, &y)? != keep {
                mismatched += 1;
            }
        }
        worst = worst.max((st.to_dense() - &dense).amax() / dense.amax().max(1.0));
    }
    Ok(CheckResult {
        name: "compact L-SR1",
        passed: mismatched == 0 && worst <= 1e-8,
        detail: format!("{sequences} sequences, {mismatched} skip mismatches, max relative deviation {worst:.2e}"),
    })
}

/// Largest relative gap between component gradients and central differences.
fn fd_gap(p: &dyn ComponentOracle, x: &DVector<f64>, comps: &[usize]) -> Result<f64> {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for &i in comps {
        let g = p.component_grad(i, x)?;
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (p.component_value(i, &xp)? - p.component_value(i, &xm)?) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
        }
    }
    Ok(worst)
}

fn gradients() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let logistic = LogisticProblem::new(LogisticProblem::synthetic_dataset(20, 6, 0.6, 5), 1e-2);
    let lx = gaussian(&mut rng, 6);
    let arch = MlpArchitecture { inputs: 5, hidden: 4, outputs: 3 };
    let inputs: Vec<f64> = (0..5 * 6).map(|_| rng.random_range(0.0..1.0)).collect();
    let mlp = Mlp::new(arch, inputs, vec![0, 1, 2, 0, 1, 2], 1e-3)?;
    let mx = mlp.init_params(3);
    let rosen = SyntheticProblem::rosenbrock();
    let rx = DVector::from_vec(vec![-0.7, 0.4]);
    let gaps = [fd_gap(&logistic, &lx, &[0, 5, 11])?, fd_gap(&mlp, &mx, &[0, 3])?, fd_gap(&rosen, &rx, &[0])?];
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok(CheckResult {
        name: "finite differences",
        passed: worst <= 1e-5,
        detail: format!("logistic {:.1e}, mlp {:.1e}, rosenbrock {:.1e}", gaps[0], gaps[1], gaps[2]),
    })
}

fn estimate_coverage(trials: usize) -> Result<CheckResult> {
    let p = SyntheticProblem::quadratic_with_condition(10, 100.0, 1).with_noise(0.01, 0.01, 77);
    let acc = AccuracyParams { kappa_ef: 1.0, kappa_eg: 1.0, eps_f: 1.0, alpha: 0.9, beta: 0.9, v_f: 0.01, v_g: 0.01 };
    let delta = 0.3;
    let (_, q) = chebyshev_sizes(&acc, delta)?;
    let x = DVector::from_element(10, 0.5);
    let f = p.base_value(&x);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let hits = (0..trials)
        .filter(|_| {
            let batch: Batch = draw_keys(q as usize, &mut rng);
            p.mean_value(&x, &batch, Execution::Sequential).is_ok_and(|v| (v - f).abs() <= acc.eps_f * delta * delta)
        })
        .count();
    let freq = hits as f64 / trials as f64;
    Ok(CheckResult {
        name: "estimate coverage",
        passed: freq >= 0.85,
        detail: format!("q={q}, {hits}/{trials} within tolerance ({freq:.3})"),
    })
}

fn determinism() -> Result<CheckResult> {
    let p = SyntheticProblem::quadratic_with_condition(5, 10.0, 2).with_noise(1e-3, 1e-3, 5);
    let method = Method {
        rule: RadiusRule::GRADIENT_SCALED,
        model: ModelKind::Lsr1(Default::default()),
        schedule: BatchSchedule::linear(1, 4, u64::MAX),
        estimates: EstimatePolicy::Resample,
    };
    let cfg = OptConfig { sfo_max: 4_000, seed: 9, ..OptConfig::default() };
    let go = |exec| run(&p, DVector::from_element(5, 1.0), &method, &cfg, exec, |_, _| ControlFlow::Continue(()));
    let a = go(Execution::Sequential)?;
    let b = go(Execution::Sequential)?;
    let c = go(Execution::default())?;
    let same = a.trace == b.trace && a.trace == c.trace && a.state == c.state;
    Ok(CheckResult {
        name: "determinism",
        passed: same,
        detail: format!("{} iterations compared across repeated and {:?} runs", a.trace.len(), Execution::default()),
    })
}

/// Runs every check; `quick` shrinks the instance counts.
pub fn run_selfcheck(quick: bool) -> Result<Vec<CheckResult>> {
    let scale = if quick { 1 } else { 5 };
    Ok(vec![
        trs_oracle(100 * scale)?,
        lsr1_recursion(20 * scale)?,
        gradients()?,
        estimate_coverage(2_000 * scale)?,
        determinism()?,
    ])
}
