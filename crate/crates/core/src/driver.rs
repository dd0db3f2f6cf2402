//! The stochastic trust-region loop.
//!
//! Each iteration builds a sampled model, sets the radius from the relative
//! radius `mu` (and, under [`RadiusRule::Power`], the model gradient norm),
//! solves the subproblem, estimates the objective at both ends of the step
//! and accepts or rejects it by the ratio test.

use std::ops::ControlFlow;
use std::sync::Arc;

use log::debug;
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lsr1::Lsr1State;
use crate::model::{Curvature, QuadraticModel};
use crate::parallel::Execution;
use crate::problems::ComponentOracle;
use crate::sampling::{
    build_model, draw_batch, estimate_pair, stream_rng, BatchMode, BatchSchedule, EstimatePolicy, ModelOrder, Stream,
};
use crate::subproblem::{cauchy_point, dogleg, lsr1_trs, TrsSolution, TrsStatus};

/// Step parameters shared by every variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptConfig {
    pub gamma: f64,
    pub eta1: f64,
    /// Gradient-versus-radius threshold; tested only under [`RadiusRule::Constant`].
    pub eta2: f64,
    pub mu0: f64,
    pub mu_max: f64,
    /// Budget of component-gradient evaluations.
    pub sfo_max: u64,
    pub seed: u64,
    pub max_iter: Option<u64>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { gamma: 2.0, eta1: 0.1, eta2: 0.0, mu0: 1.0, mu_max: 1e3, sfo_max: 0, seed: 0, max_iter: None }
    }
}

impl OptConfig {
    pub fn validate(&self, rule: RadiusRule) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 1.0) {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.eta1 > 0.0 && self.eta1 < 1.0) {
            return bad(format!("eta1 must lie in (0, 1), got {}", self.eta1));
        }
        if !(self.eta2 >= 0.0) {
            return bad(format!("eta2 must be nonnegative, got {}", self.eta2));
        }
        if !(self.mu0 > 0.0 && self.mu0 <= self.mu_max) {
            return bad(format!("need 0 < mu0 <= mu_max, got mu0={} mu_max={}", self.mu0, self.mu_max));
        }
        if let RadiusRule::Power { r1, r2 } = rule {
            if !(r1 >= 0.0 && r2 >= 0.0) {
                return bad(format!("radius exponents must be nonnegative, got r1={r1} r2={r2}"));
            }
            // Under the gradient-scaled rule ||g|| >= eta2 delta holds whenever mu <= 1/eta2.
            if self.eta2 > 0.0 && r1 == 1.0 && r2 == 1.0 && self.mu_max > 1.0 / self.eta2 {
                return bad(format!("mu_max={} must not exceed 1/eta2={}", self.mu_max, 1.0 / self.eta2));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadiusRule {
    /// `delta = mu^r1 ||g||^r2`; `r1 = r2 = 1` is the gradient-scaled rule.
    Power { r1: f64, r2: f64 },
    /// `delta = mu`, the classical radius update.
    Constant,
}

impl RadiusRule {
    pub const GRADIENT_SCALED: RadiusRule = RadiusRule::Power { r1: 1.0, r2: 1.0 };
}

pub fn radius(rule: RadiusRule, mu: f64, grad_norm: f64) -> f64 {
    match rule {
        RadiusRule::Power { r1, r2 } if r1 == 1.0 && r2 == 1.0 => mu * grad_norm,
        RadiusRule::Power { r1, r2 } => mu.powf(r1) * grad_norm.powf(r2),
        RadiusRule::Constant => mu,
    }
}

/// `(f0 - fd) / pred`.
pub fn ratio(f0: f64, fd: f64, pred: f64) -> Result<f64> {
    if !(pred > 0.0) {
        return Err(Error::NonPositivePrediction(pred));
    }
    Ok((f0 - fd) / pred)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionState {
    pub x: DVector<f64>,
    pub mu: f64,
    pub k: u64,
    pub sfo_count: u64,
    pub last_rho: Option<f64>,
    pub last_success: bool,
}

impl TrustRegionState {
    pub fn new(x: DVector<f64>, mu0: f64) -> Self {
        Self { x, mu: mu0, k: 0, sfo_count: 0, last_rho: None, last_success: false }
    }
}

/// Applies the ratio test and the `mu` update; returns whether the step was accepted.
pub fn accept_update(
    rho: f64,
    grad_norm: f64,
    delta: f64,
    state: &mut TrustRegionState,
    cfg: &OptConfig,
    rule: RadiusRule,
    d: &DVector<f64>,
) -> bool {
    let success = match rule {
        RadiusRule::Power { .. } => rho >= cfg.eta1,
        RadiusRule::Constant => rho >= cfg.eta1 && grad_norm >= cfg.eta2 * delta,
    };
    if success {
        state.x += d;
        state.mu = (cfg.gamma * state.mu).min(cfg.mu_max);
    } else {
        state.mu /= cfg.gamma;
    }
    state.k += 1;
    state.last_rho = Some(rho);
    state.last_success = success;
    success
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: u64,
    pub delta: f64,
    pub mu_before: f64,
    pub mu_after: f64,
    pub rho: f64,
    pub pred: f64,
    pub success: bool,
    pub grad_norm: f64,
    pub batch_size_used: u64,
    pub estimate_size: u64,
    /// Cumulative gradient evaluations after this iteration.
    pub sfo: u64,
    pub trs_status: TrsStatusTag,
    /// Whether the curvature pair of this iteration entered the L-SR1 memory.
    pub pair_accepted: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrsStatusTag {
    Interior,
    Boundary,
    HardCase,
    CauchyFallback,
}

impl From<TrsStatus> for TrsStatusTag {
    fn from(s: TrsStatus) -> Self {
        match s {
            TrsStatus::Interior => Self::Interior,
            TrsStatus::Boundary => Self::Boundary,
            TrsStatus::HardCase => Self::HardCase,
            TrsStatus::CauchyFallback => Self::CauchyFallback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lsr1Params {
    pub memory: usize,
    pub tau0: f64,
    pub skip_r: f64,
}

impl Default for Lsr1Params {
    fn default() -> Self {
        Self { memory: 30, tau0: 1.0, skip_r: 1e-8 }
    }
}

/// Model Hessian and the matching subproblem solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `B = 0`; the step is the boundary point along `-g`.
    FirstOrder,
    /// Sampled Hessian on the model batch, solved by dogleg.
    SampledHessian,
    /// L-SR1 memory updated every iteration from a second gradient at the trial point.
    Lsr1(Lsr1Params),
}

/// Everything besides [`OptConfig`] that defines a variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method {
    pub rule: RadiusRule,
    pub model: ModelKind,
    pub schedule: BatchSchedule,
    pub estimates: EstimatePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    BudgetExhausted,
    /// The sampled model gradient was exactly zero.
    ZeroGradient,
    /// The relative radius underflowed.
    RadiusCollapse,
    /// The observer asked to stop.
    Stopped,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: TrustRegionState,
    pub trace: Vec<StepRecord>,
    pub status: RunStatus,
}

impl RunOutcome {
    pub fn successes(&self) -> usize {
        self.trace.iter().filter(|r| r.success).count()
    }
}

/// Runs the method from `x0` until the gradient budget is spent.
///
/// The observer sees the state after each iteration and may stop the run.
/// Identical inputs give bit-identical traces, whichever [`Execution`] is used.
pub fn run<P, F>(
    problem: &P,
    x0: DVector<f64>,
    method: &Method,
    cfg: &OptConfig,
    exec: Execution,
    mut observer: F,
) -> Result<RunOutcome>
where
    P: ComponentOracle + ?Sized,
    F: FnMut(&TrustRegionState, &StepRecord) -> ControlFlow<()>,
{
    cfg.validate(method.rule)?;
    method.schedule.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let population = problem.num_components();
    if let Some(n) = population {
        if method.schedule.b_max > n as u64 {
            return Err(Error::BatchTooLarge { batch: method.schedule.b_max, population: n as u64 });
        }
    }
    let mut model_rng = stream_rng(cfg.seed, Stream::Model);
    let mut est_rng = stream_rng(cfg.seed, Stream::Estimate);
    let mut memory = match method.model {
        ModelKind::Lsr1(p) => Some(Lsr1State::new(problem.dim(), p.tau0, p.memory, p.skip_r)?),
        _ => None,
    };

    let mut state = TrustRegionState::new(x0, cfg.mu0);
    let mut trace = Vec::new();
    let mut last_gnorm: Option<f64> = None;

    let status = loop {
        if state.sfo_count >= cfg.sfo_max {
            break RunStatus::BudgetExhausted;
        }
        if cfg.max_iter.is_some_and(|m| state.k >= m) {
            break RunStatus::IterationLimit;
        }
        if !(state.mu >= f64::MIN_POSITIVE) {
            break RunStatus::RadiusCollapse;
        }
        let k = state.k;
        let mu_before = state.mu;

        // The batch size must be fixed before the model gradient exists, so it
        // uses the radius implied by the previous model gradient norm.
        let delta_pre = match (method.rule, last_gnorm) {
            (RadiusRule::Constant, _) => mu_before,
            (rule, Some(gn)) if gn > 0.0 => radius(rule, mu_before, gn),
            (_, _) => mu_before,
        };
        let order = match &memory {
            Some(st) => ModelOrder::Memory(Arc::new(st.clone())),
            None if method.model == ModelKind::SampledHessian => ModelOrder::SampledHessian,
            None => ModelOrder::First,
        };
        let mut b = method.schedule.model_size(k, delta_pre)?;
        let mut batch = draw_batch(population, b, &mut model_rng)?;
        let mut model = build_model(problem, &state.x, &batch, &order, exec, &mut state.sfo_count)?;
        let mut gnorm = model.g.norm();
        let mut delta = radius(method.rule, mu_before, gnorm);
        // Under the Chebyshev schedule the batch is enlarged until it is large
        // enough for the radius it produces; every attempt is charged.
        if matches!(method.schedule.mode, BatchMode::Chebyshev(_)) && method.rule != RadiusRule::Constant {
            for _ in 0..8 {
                if !(delta > 0.0) {
                    break;
                }
                let need = method.schedule.model_size(k, delta)?;
                if need <= b || b == method.schedule.b_max {
                    break;
                }
                b = need;
                batch = draw_batch(population, b, &mut model_rng)?;
                model = build_model(problem, &state.x, &batch, &order, exec, &mut state.sfo_count)?;
                gnorm = model.g.norm();
                delta = radius(method.rule, mu_before, gnorm);
            }
        }
        last_gnorm = Some(gnorm);

        if gnorm == 0.0 {
            debug!("iteration {k}: zero model gradient");
            break RunStatus::ZeroGradient;
        }
        if !(delta > 0.0) {
            break RunStatus::RadiusCollapse;
        }

        let sol = solve_subproblem(&model, method.model, memory.as_ref(), delta)?;
        let trial = &state.x + &sol.d;

        let pair_accepted = match memory.as_mut() {
            Some(st) => {
                // y = g(x + s) - g on the model batch, charged like the model gradient
                let g_trial = problem.mean_grad(&trial, &batch, exec)?;
                state.sfo_count = state.sfo_count.saturating_add(batch.len());
                Some(st.try_update(&sol.d, &(g_trial - &model.g))?)
            }
            None => None,
        };

        let est_batch = match method.estimates {
            EstimatePolicy::SharedBatch => batch,
            EstimatePolicy::Resample => {
                let q = method.schedule.estimate_size(k, delta)?;
                draw_batch(population, q, &mut est_rng)?
            }
        };
        let est = estimate_pair(problem, &state.x, &trial, &est_batch, exec)?;
        let rho = ratio(est.f0, est.fd, sol.pred)?;
        let success = accept_update(rho, gnorm, delta, &mut state, cfg, method.rule, &sol.d);

        let rec = StepRecord {
            k,
            delta,
            mu_before,
            mu_after: state.mu,
            rho,
            pred: sol.pred,
            success,
            grad_norm: gnorm,
            batch_size_used: b,
            estimate_size: est.q_used,
            sfo: state.sfo_count,
            trs_status: sol.status.into(),
            pair_accepted,
        };
        let flow = observer(&state, &rec);
        trace.push(rec);
        if flow.is_break() {
            break RunStatus::Stopped;
        }
    };
    Ok(RunOutcome { state, trace, status })
}

fn solve_subproblem(
    model: &QuadraticModel,
    kind: ModelKind,
    memory: Option<&Lsr1State>,
    delta: f64,
) -> Result<TrsSolution> {
    let g = &model.g;
    match (&model.curvature, kind) {
        (Curvature::Dense(b), ModelKind::SampledHessian) => dogleg(g, b, delta),
        (_, ModelKind::Lsr1(_)) => {
            let st = memory.expect("L-SR1 runs carry a memory");
            if st.is_empty() {
                // steepest descent on the initial scaled-identity model
                cauchy_point(g, &model.curvature, delta)
            } else {
                lsr1_trs(g, st, delta)
            }
        }
        (c, _) => cauchy_point(g, c, delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SyntheticProblem;
    use nalgebra::DMatrix;

    const BASE: OptConfig =
        OptConfig { gamma: 2.0, eta1: 0.1, eta2: 0.0, mu0: 1.0, mu_max: 1000.0, sfo_max: 0, seed: 0, max_iter: None };

    #[test]
    fn radius_rules() {
        assert_eq!(radius(RadiusRule::GRADIENT_SCALED, 2.0, 3.0), 6.0);
        assert_eq!(radius(RadiusRule::Constant, 0.7, 100.0), 0.7);
        assert_eq!(radius(RadiusRule::Power { r1: 1.0, r2: 0.5 }, 1.0, 4.0), 2.0);
        assert_eq!(radius(RadiusRule::GRADIENT_SCALED, 2.0, 0.0), 0.0);
    }

    #[test]
    fn ratio_examples() {
        assert!((ratio(10.0, 9.8, 1.0).unwrap() - 0.2).abs() < 1e-14);
        assert_eq!(ratio(5.0, 5.0, 2.0).unwrap(), 0.0);
        assert!(ratio(1.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn mu_update() {
        let d = DVector::from_vec(vec![1.0, -1.0]);
        let mut st = TrustRegionState::new(DVector::zeros(2), 1.0);
        assert!(accept_update(0.2, 1.0, 1.0, &mut st, &BASE, RadiusRule::GRADIENT_SCALED, &d));
        assert_eq!(st.mu, 2.0);
        assert_eq!(st.x, d);

        let mut st = TrustRegionState::new(DVector::zeros(2), 1.0);
        assert!(!accept_update(0.05, 1.0, 1.0, &mut st, &BASE, RadiusRule::GRADIENT_SCALED, &d));
        assert_eq!(st.mu, 0.5);
        assert_eq!(st.x, DVector::zeros(2));
        assert_eq!(st.k, 1);

        let mut st = TrustRegionState::new(DVector::zeros(2), 800.0);
        accept_update(0.9, 1.0, 1.0, &mut st, &BASE, RadiusRule::GRADIENT_SCALED, &d);
        assert_eq!(st.mu, 1000.0);
    }

    #[test]
    fn constant_rule_needs_gradient_test() {
        let cfg = OptConfig { eta2: 0.5, ..BASE };
        let d = DVector::from_vec(vec![1.0]);
        let mut st = TrustRegionState::new(DVector::zeros(1), 1.0);
        assert!(!accept_update(0.9, 0.4, 1.0, &mut st, &cfg, RadiusRule::Constant, &d));
        assert!(accept_update(0.9, 0.6, 1.0, &mut st, &cfg, RadiusRule::Constant, &d));
    }

    #[test]
    fn config_validation() {
        let rule = RadiusRule::GRADIENT_SCALED;
        assert!(BASE.validate(rule).is_ok());
        assert!(OptConfig { gamma: 1.0, ..BASE }.validate(rule).is_err());
        assert!(OptConfig { eta1: 1.0, ..BASE }.validate(rule).is_err());
        assert!(OptConfig { mu0: 2000.0, ..BASE }.validate(rule).is_err());
        assert!(OptConfig { eta2: 0.01, ..BASE }.validate(rule).is_err());
        assert!(OptConfig { eta2: 0.001, ..BASE }.validate(rule).is_ok());
        assert!(OptConfig { eta2: 0.01, ..BASE }.validate(RadiusRule::Constant).is_ok());
    }

    fn identity_quadratic(dim: usize) -> SyntheticProblem {
        SyntheticProblem::quadratic(DMatrix::identity(dim, dim), DVector::zeros(dim)).unwrap()
    }

    fn exact_method(model: ModelKind) -> Method {
        Method {
            rule: RadiusRule::GRADIENT_SCALED,
            model,
            schedule: BatchSchedule::linear(0, 1, u64::MAX),
            estimates: EstimatePolicy::SharedBatch,
        }
    }

    #[test]
    fn exact_model_on_quadratic_always_succeeds() {
        let p = identity_quadratic(3);
        let x0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let cfg = OptConfig { sfo_max: u64::MAX, max_iter: Some(30), ..BASE };
        let out = run(&p, x0, &exact_method(ModelKind::SampledHessian), &cfg, Execution::Sequential, |_, _| {
            ControlFlow::Continue(())
        })
        .unwrap();
        // mu = 1 and B = I give the Newton step at once, then the gradient vanishes
        assert_eq!(out.status, RunStatus::ZeroGradient);
        assert!(out.trace.iter().all(|r| (r.rho - 1.0).abs() < 1e-10 && r.success));
        assert_eq!(out.trace.len(), 1);
        assert!(out.state.x.norm() == 0.0);
    }

    #[test]
    fn first_order_on_quadratic_converges_geometrically() {
        let p = identity_quadratic(2);
        let cfg = OptConfig { sfo_max: u64::MAX, max_iter: Some(60), mu0: 0.5, mu_max: 0.5, ..BASE };
        let out = run(
            &p,
            DVector::from_vec(vec![3.0, 4.0]),
            &exact_method(ModelKind::FirstOrder),
            &cfg,
            Execution::Sequential,
            |_, _| ControlFlow::Continue(()),
        )
        .unwrap();
        let norms: Vec<f64> = out.trace.iter().map(|r| r.grad_norm).collect();
        assert!(out.trace.iter().all(|r| r.success));
        assert!(norms.windows(2).all(|w| (w[1] / w[0] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn zero_budget_gives_empty_trace() {
        let p = identity_quadratic(2);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let out = run(&p, x0.clone(), &exact_method(ModelKind::FirstOrder), &BASE, Execution::Sequential, |_, _| {
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.state, TrustRegionState::new(x0, BASE.mu0));
        assert_eq!(out.status, RunStatus::BudgetExhausted);
    }

    #[test]
    fn zero_gradient_terminates() {
        let p = identity_quadratic(2);
        let cfg = OptConfig { sfo_max: 100, ..BASE };
        let out =
            run(&p, DVector::zeros(2), &exact_method(ModelKind::FirstOrder), &cfg, Execution::Sequential, |_, _| {
                ControlFlow::Continue(())
            })
            .unwrap();
        assert_eq!(out.status, RunStatus::ZeroGradient);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn observer_can_stop() {
        let p = identity_quadratic(2);
        let cfg = OptConfig { sfo_max: 1000, mu0: 0.25, mu_max: 0.25, ..BASE };
        let out = run(
            &p,
            DVector::from_vec(vec![1.0, 1.0]),
            &exact_method(ModelKind::FirstOrder),
            &cfg,
            Execution::Sequential,
            |st, _| if st.k == 3 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) },
        )
        .unwrap();
        assert_eq!(out.status, RunStatus::Stopped);
        assert_eq!(out.trace.len(), 3);
    }
}
