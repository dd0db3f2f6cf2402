//! Loading problems from a config, running one algorithm and writing its trace.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::Serialize;
use serde_json::json;

use super::adagrad::{run_adagrad, AdaGradConfig};
use super::config::{Algorithm, ExperimentConfig, InitKind, ProblemKind};
use super::diagnostics::{compute_phi, DiagnosticPoint, DiagnosticsConfig};
use super::fstar::cached_fstar;
use crate::data::{read_idx_file, read_libsvm_file, split, IdxData, SparseDataset, SplitSpec};
use crate::driver::{run, Method, RunStatus, TrustRegionState};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::problems::{Batch, ComponentOracle, LogisticProblem, Mlp, SyntheticProblem};
use crate::sampling::{stream_rng, BatchMode, BatchSchedule, Stream};

/// Column order of `trace.csv`.
pub const TRACE_HEADER: [&str; 13] = [
    "k",
    "effective_passes",
    "train_loss",
    "test_accuracy",
    "delta",
    "mu",
    "rho",
    "success",
    "grad_norm_model",
    "batch_size",
    "phi",
    "varsigma",
    "is_eval_row",
];

pub enum LoadedProblem {
    Logistic { train: LogisticProblem, test: Option<LogisticProblem> },
    Mlp { train: Mlp, test: Option<Mlp> },
    Synthetic(SyntheticProblem),
}

impl LoadedProblem {
    pub fn oracle(&self) -> &dyn ComponentOracle {
        match self {
            LoadedProblem::Logistic { train, .. } => train,
            LoadedProblem::Mlp { train, .. } => train,
            LoadedProblem::Synthetic(p) => p,
        }
    }

    /// Dimension of one input sample, which sets the default base batch size.
    pub fn feature_dim(&self) -> usize {
        match self {
            LoadedProblem::Logistic { train, .. } => train.data().dim(),
            LoadedProblem::Mlp { train, .. } => train.architecture().inputs,
            LoadedProblem::Synthetic(p) => p.dim(),
        }
    }

    /// Samples per effective pass.
    pub fn pass_size(&self, cfg: &ExperimentConfig) -> u64 {
        match self.oracle().num_components() {
            Some(n) => n as u64,
            None => cfg.pass_size,
        }
    }

    pub fn test_accuracy(&self, x: &DVector<f64>) -> Option<f64> {
        match self {
            LoadedProblem::Logistic { test, .. } => test.as_ref().map(|t| t.accuracy(x)),
            LoadedProblem::Mlp { test, .. } => test.as_ref().map(|t| t.accuracy(x)),
            LoadedProblem::Synthetic(_) => None,
        }
    }

    /// Analytic optimal value or the logistic reference from the cache.
    pub fn known_f_star(&self, cfg: &ExperimentConfig) -> Result<Option<f64>> {
        if let Some(f) = cfg.f_star {
            return Ok(Some(f));
        }
        match self {
            LoadedProblem::Synthetic(p) => Ok(p.f_star()),
            LoadedProblem::Logistic { .. } => match fstar_cache_path(cfg) {
                Some(path) => Ok(cached_fstar(&path, &fstar_key(cfg))?.map(|e| e.f_star)),
                None => Ok(None),
            },
            LoadedProblem::Mlp { .. } => Ok(None),
        }
    }

    /// Gradient Lipschitz constant: analytic for quadratics, the standard
    /// bound `max ||a_i||^2 / 4 + lambda` for logistic regression.
    pub fn lipschitz(&self, cfg: &ExperimentConfig) -> Option<f64> {
        if cfg.l_smooth.is_some() {
            return cfg.l_smooth;
        }
        match self {
            LoadedProblem::Synthetic(p) => p.lipschitz(),
            LoadedProblem::Logistic { train, .. } => {
                let d = train.data();
                let m = (0..d.len()).map(|i| d.row_norm_squared(i)).fold(0.0, f64::max);
                Some(0.25 * m + train.lambda())
            }
            LoadedProblem::Mlp { .. } => None,
        }
    }
}

/// Where reference optima for this config are cached.
pub fn fstar_cache_path(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.fstar_cache.clone().or_else(|| {
        cfg.dataset.as_ref().map(|d| {
            let mut s = d.as_os_str().to_owned();
            s.push(".fstar.json");
            PathBuf::from(s)
        })
    })
}

/// Cache key identifying the training objective.
pub fn fstar_key(cfg: &ExperimentConfig) -> String {
    let data = match &cfg.dataset {
        Some(_) => format!(
            "file test={} frac={} shuffle={} split_seed={}",
            cfg.test_dataset.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            cfg.train_fraction,
            cfg.split_shuffle,
            cfg.data_seed
        ),
        None => format!(
            "synthetic n={} d={} density={} seed={}",
            cfg.synthetic_n, cfg.synthetic_d, cfg.synthetic_density, cfg.data_seed
        ),
    };
    format!("logistic lambda={:e} {data}", cfg.lambda)
}

fn load_logistic(cfg: &ExperimentConfig) -> Result<(SparseDataset, Option<SparseDataset>)> {
    match (&cfg.dataset, &cfg.test_dataset) {
        (Some(train), Some(test)) => {
            let tr = read_libsvm_file(train, None)?;
            let te = read_libsvm_file(test, None)?;
            let dim = tr.dim().max(te.dim());
            Ok((tr.with_dim(dim), Some(te.with_dim(dim))))
        }
        (Some(path), None) => {
            let ds = read_libsvm_file(path, None)?;
            let spec =
                SplitSpec { train_fraction: cfg.train_fraction, seed: cfg.data_seed, shuffle: cfg.split_shuffle };
            let (tr, te) = split(&ds, &spec)?;
            Ok((tr, Some(te)))
        }
        (None, _) => {
            // i.i.d. rows, so the held-out quarter needs no shuffling
            let n = cfg.synthetic_n;
            let n_test = (n / 4).max(1);
            let ds =
                LogisticProblem::synthetic_dataset(n + n_test, cfg.synthetic_d, cfg.synthetic_density, cfg.data_seed);
            let train: Vec<usize> = (0..n).collect();
            let test: Vec<usize> = (n..n + n_test).collect();
            Ok((ds.subset(&train), Some(ds.subset(&test))))
        }
    }
}

fn idx_pair(dir: &Path, prefix: &str, lambda: f64) -> Result<Option<Mlp>> {
    let find = |kind: &str, legacy: &str| {
        [format!("{prefix}-{kind}.idx"), format!("{prefix}-{legacy}")]
            .into_iter()
            .map(|name| dir.join(name))
            .find(|p| p.exists())
    };
    let (Some(img), Some(lab)) = (find("images", "images-idx3-ubyte"), find("labels", "labels-idx1-ubyte")) else {
        return Ok(None);
    };
    match (read_idx_file(img)?, read_idx_file(lab)?) {
        (IdxData::Images(images), IdxData::Labels(labels)) => Ok(Some(Mlp::from_images(&images, &labels, lambda)?)),
        _ => Err(Error::Idx(format!("{prefix} files in {} hold the wrong record types", dir.display()))),
    }
}

pub fn load_problem(cfg: &ExperimentConfig) -> Result<LoadedProblem> {
    Ok(match cfg.problem {
        ProblemKind::Logistic => {
            let (tr, te) = load_logistic(cfg)?;
            LoadedProblem::Logistic {
                train: LogisticProblem::new(tr, cfg.lambda),
                test: te.map(|t| LogisticProblem::new(t, cfg.lambda)),
            }
        }
        ProblemKind::Mlp => {
            let dir = cfg.dataset.as_ref().ok_or_else(|| Error::Config("the mlp problem needs a dataset".into()))?;
            let train = idx_pair(dir, "train", cfg.lambda)?
                .ok_or_else(|| Error::Config(format!("no train-images/train-labels IDX files in {}", dir.display())))?;
            let test = idx_pair(dir, "test", cfg.lambda)?;
            LoadedProblem::Mlp { train, test }
        }
        ProblemKind::Quadratic | ProblemKind::Rosenbrock => {
            let base = if cfg.problem == ProblemKind::Quadratic {
                SyntheticProblem::quadratic_with_condition(cfg.dim, cfg.condition, cfg.data_seed)
            } else {
                SyntheticProblem::rosenbrock()
            };
            let noise_seed = stream_rng(cfg.seed, Stream::Noise).next_u64();
            LoadedProblem::Synthetic(base.with_noise(cfg.noise_v_f, cfg.noise_v_g, noise_seed))
        }
    })
}

pub fn initial_point(cfg: &ExperimentConfig, problem: &LoadedProblem) -> Result<DVector<f64>> {
    let dim = problem.oracle().dim();
    Ok(match (problem, cfg.init) {
        (_, Some(InitKind::Zero)) => DVector::zeros(dim),
        (LoadedProblem::Mlp { train, .. }, None | Some(InitKind::FanIn)) => {
            train.init_params(stream_rng(cfg.seed, Stream::Init).next_u64())
        }
        (_, Some(InitKind::FanIn)) => {
            return Err(Error::Config("fan_in initialization applies to the mlp only".into()))
        }
        (LoadedProblem::Logistic { .. }, None) => DVector::zeros(dim),
        (LoadedProblem::Synthetic(_), None) if cfg.problem == ProblemKind::Rosenbrock => {
            DVector::from_vec(vec![-1.2, 1.0])
        }
        (LoadedProblem::Synthetic(_), None) => DVector::from_element(dim, cfg.x0),
    })
}

/// Epochs of plain minibatch SGD over shuffled data. Returns the gradient evaluations used.
pub fn warm_start(
    problem: &dyn ComponentOracle,
    x: &mut DVector<f64>,
    epochs: u32,
    lr: f64,
    batch: u64,
    seed: u64,
    exec: Execution,
) -> Result<u64> {
    if epochs == 0 {
        return Ok(0);
    }
    let n = problem.num_components().ok_or(Error::Unsupported("warm start on an unbounded population"))?;
    if batch == 0 || !(lr > 0.0) {
        return Err(Error::Config("warm start needs a positive batch and learning rate".into()));
    }
    let mut rng = stream_rng(seed, Stream::WarmStart);
    let mut order: Vec<usize> = (0..n).collect();
    let mut used = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch as usize) {
            let b = Batch::Indices(chunk.to_vec());
            let g = problem.mean_grad(x, &b, exec)?;
            x.axpy(-lr, &g, 1.0);
            used += chunk.len() as u64;
        }
    }
    Ok(used)
}

/// One line of `trace.csv`. Absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    /// Iteration index for iteration rows; iterations completed for evaluation rows.
    pub k: u64,
    pub effective_passes: f64,
    pub train_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub delta: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub success: Option<u8>,
    pub grad_norm_model: Option<f64>,
    pub batch_size: Option<u64>,
    pub phi: Option<f64>,
    /// Successes over failures so far; empty while nothing has failed.
    pub varsigma: Option<f64>,
    pub is_eval_row: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub status: String,
    pub iterations: u64,
    pub successes: u64,
    pub failures: u64,
    pub sfo: u64,
    pub sfo_max: u64,
    pub warm_start_sfo: u64,
    pub effective_passes: f64,
    pub final_train_loss: f64,
    pub final_test_accuracy: Option<f64>,
    pub final_grad_norm: f64,
    pub f_star: Option<f64>,
    pub wall_time_secs: f64,
}

pub struct ExperimentReport {
    pub rows: Vec<MetricsRow>,
    /// Full evaluations behind the evaluation rows.
    pub diagnostics: Vec<DiagnosticPoint>,
    pub summary: Summary,
    pub x: DVector<f64>,
    pub config: ExperimentConfig,
}

struct Recorder<'a> {
    problem: &'a LoadedProblem,
    diag: Option<DiagnosticsConfig>,
    pass: f64,
    eval_every: u64,
    rows: Vec<MetricsRow>,
    points: Vec<DiagnosticPoint>,
    wins: u64,
    losses: u64,
}

impl Recorder<'_> {
    fn varsigma(&self) -> Option<f64> {
        (self.losses > 0).then(|| self.wins as f64 / self.losses as f64)
    }

    fn eval(&mut self, k: u64, x: &DVector<f64>, mu: Option<f64>, sfo: u64) {
        let p = self.problem.oracle();
        let f = p.full_value(x);
        let gn = p.full_grad(x).norm();
        self.points.push(DiagnosticPoint { k, f_val: f, grad_norm: gn });
        let phi = match (self.diag, mu) {
            (Some(d), Some(m)) => Some(compute_phi(&d, f, m, gn)),
            _ => None,
        };
        self.rows.push(MetricsRow {
            k,
            effective_passes: sfo as f64 / self.pass,
            train_loss: Some(f),
            test_accuracy: self.problem.test_accuracy(x),
            delta: None,
            mu,
            rho: None,
            success: None,
            grad_norm_model: None,
            batch_size: None,
            phi,
            varsigma: self.varsigma(),
            is_eval_row: 1,
        });
    }

    fn step(&mut self, row: MetricsRow, success: Option<bool>) {
        match success {
            Some(true) => self.wins += 1,
            Some(false) => self.losses += 1,
            None => {}
        }
        self.rows.push(MetricsRow { varsigma: self.varsigma(), ..row });
    }

    fn due(&self, done: u64) -> bool {
        done.is_multiple_of(self.eval_every)
    }
}

/// Diagnostics available for this config: explicit values first, then
/// analytic or cached ones.
pub fn resolve_diagnostics(cfg: &ExperimentConfig, problem: &LoadedProblem) -> Result<Option<DiagnosticsConfig>> {
    let (Some(f_star), Some(l)) = (problem.known_f_star(cfg)?, problem.lipschitz(cfg)) else {
        return Ok(None);
    };
    DiagnosticsConfig::new(cfg.nu, l, f_star).map(Some)
}

/// Runs the configured algorithm in memory.
pub fn execute_experiment(cfg: &ExperimentConfig, diag: Option<DiagnosticsConfig>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let problem = load_problem(cfg)?;
    let oracle = problem.oracle();
    let pass = problem.pass_size(cfg);
    let b_max = cfg.b_max.unwrap_or(match oracle.num_components() {
        Some(n) => n as u64,
        None => u64::MAX,
    });
    let b0 = cfg.b0.unwrap_or(problem.feature_dim() as u64 + 1).min(b_max);
    let sfo_max = (cfg.sfo_max_passes * pass as f64).ceil() as u64;
    let eval_every = cfg.eval_every.unwrap_or_else(|| pass.div_ceil(10 * b0.max(1))).max(1);
    let diag = match diag {
        Some(d) => Some(d),
        None => resolve_diagnostics(cfg, &problem)?,
    };

    let mut x0 = initial_point(cfg, &problem)?;
    let warm_sfo = warm_start(
        oracle,
        &mut x0,
        cfg.warm_start_epochs,
        cfg.warm_start_lr,
        cfg.warm_start_batch,
        cfg.seed,
        cfg.execution,
    )?;

    let mut rec = Recorder {
        problem: &problem,
        diag,
        pass: pass as f64,
        eval_every,
        rows: Vec::new(),
        points: Vec::new(),
        wins: 0,
        losses: 0,
    };
    let (x, iterations, sfo, mu_final, status) = match cfg.algorithm {
        Algorithm::AdaGrad => {
            rec.eval(0, &x0, None, 0);
            let ac = AdaGradConfig {
                eta: cfg.adagrad_eta,
                eps: cfg.adagrad_eps,
                batch: cfg.adagrad_batch.unwrap_or(b0),
                sfo_max,
                seed: cfg.seed,
                max_iter: cfg.max_iter,
            };
            let out = run_adagrad(oracle, x0, &ac, cfg.execution, |x, r| {
                let row = MetricsRow {
                    k: r.k,
                    effective_passes: r.sfo as f64 / rec.pass,
                    train_loss: None,
                    test_accuracy: None,
                    delta: None,
                    mu: None,
                    rho: None,
                    success: None,
                    grad_norm_model: Some(r.grad_norm),
                    batch_size: Some(r.batch_size),
                    phi: None,
                    varsigma: None,
                    is_eval_row: 0,
                };
                rec.step(row, None);
                if rec.due(r.k + 1) {
                    rec.eval(r.k + 1, x, None, r.sfo);
                }
                ControlFlow::Continue(())
            })?;
            let n = out.trace.len() as u64;
            (
                out.x,
                n,
                out.sfo_count,
                None,
                if out.sfo_count >= sfo_max { "budget_exhausted" } else { "iteration_limit" },
            )
        }
        alg => {
            let rule = alg.rule(cfg.r1, cfg.r2).expect("trust-region variant");
            let model = alg.model(cfg.lsr1).expect("trust-region variant");
            let mode = if cfg.chebyshev { BatchMode::Chebyshev(cfg.accuracy) } else { BatchMode::LinearDelta };
            let method = Method {
                rule,
                model,
                schedule: BatchSchedule { t0: cfg.t0, b0, b_max, mode },
                estimates: cfg.estimate_policy,
            };
            let opt = cfg.opt_config(sfo_max);
            rec.eval(0, &x0, Some(opt.mu0), 0);
            let out = run(oracle, x0, &method, &opt, cfg.execution, |st: &TrustRegionState, r| {
                let row = MetricsRow {
                    k: r.k,
                    effective_passes: r.sfo as f64 / rec.pass,
                    train_loss: None,
                    test_accuracy: None,
                    delta: Some(r.delta),
                    mu: Some(r.mu_before),
                    rho: Some(r.rho),
                    success: Some(u8::from(r.success)),
                    grad_norm_model: Some(r.grad_norm),
                    batch_size: Some(r.batch_size_used),
                    phi: None,
                    varsigma: None,
                    is_eval_row: 0,
                };
                rec.step(row, Some(r.success));
                if rec.due(st.k) {
                    rec.eval(st.k, &st.x, Some(st.mu), st.sfo_count);
                }
                ControlFlow::Continue(())
            })?;
            let status = match out.status {
                RunStatus::BudgetExhausted => "budget_exhausted",
                RunStatus::ZeroGradient => "zero_gradient",
                RunStatus::RadiusCollapse => "radius_collapse",
                RunStatus::Stopped => "stopped",
                RunStatus::IterationLimit => "iteration_limit",
            };
            (out.state.x, out.state.k, out.state.sfo_count, Some(out.state.mu), status)
        }
    };
    if rec.points.last().is_none_or(|p| p.k != iterations) {
        rec.eval(iterations, &x, mu_final, sfo);
    }
    let last = *rec.points.last().expect("final evaluation recorded");
    let (wins, losses) = (rec.wins, rec.losses);
    let summary = Summary {
        algorithm: cfg.algorithm.to_string(),
        preset: cfg.preset.clone(),
        seed: cfg.seed,
        status: status.into(),
        iterations,
        successes: wins,
        failures: losses,
        sfo,
        sfo_max,
        warm_start_sfo: warm_sfo,
        effective_passes: sfo as f64 / pass as f64,
        final_train_loss: last.f_val,
        final_test_accuracy: problem.test_accuracy(&x),
        final_grad_norm: last.grad_norm,
        f_star: diag.map(|d| d.f_star),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    info!(
        "{} seed {}: {} iterations, loss {:.6}, {:.2} passes",
        summary.algorithm, cfg.seed, iterations, summary.final_train_loss, summary.effective_passes
    );
    Ok(ExperimentReport { rows: rec.rows, diagnostics: rec.points, summary, x, config: cfg.clone() })
}

pub fn write_trace_csv<W: std::io::Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn summary_json(report: &ExperimentReport) -> serde_json::Value {
    let s = &report.summary;
    let varsigma = if s.failures == 0 { json!("inf") } else { json!(s.successes as f64 / s.failures as f64) };
    let mut v = serde_json::to_value(s).expect("summary serializes");
    v["varsigma"] = varsigma;
    v["config"] = json!(report.config.echo());
    v
}

/// Runs the experiment and writes `trace.csv` and `summary.json` under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, diag: Option<DiagnosticsConfig>) -> Result<ExperimentReport> {
    let report = execute_experiment(cfg, diag)?;
    std::fs::create_dir_all(&cfg.out)?;
    let file = std::fs::File::create(cfg.out.join("trace.csv"))?;
    write_trace_csv(&report.rows, std::io::BufWriter::new(file))?;
    let text = serde_json::to_string_pretty(&summary_json(&report))?;
    std::fs::write(cfg.out.join("summary.json"), text + "\n")?;
    Ok(report)
}
