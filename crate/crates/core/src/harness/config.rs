//! Experiment configuration: named presets, flat `key = value` files and overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::driver::{Lsr1Params, ModelKind, OptConfig, RadiusRule};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::sampling::{AccuracyParams, EstimatePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Strme1st,
    Strme2ndDogleg,
    StrmeLsr1,
    Storm1st,
    Storm2nd,
    StormLsr1,
    AdaGrad,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Strme1st,
        Algorithm::Strme2ndDogleg,
        Algorithm::StrmeLsr1,
        Algorithm::Storm1st,
        Algorithm::Storm2nd,
        Algorithm::StormLsr1,
        Algorithm::AdaGrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Strme1st => "strme_1st",
            Algorithm::Strme2ndDogleg => "strme_2nd_dogleg",
            Algorithm::StrmeLsr1 => "strme_lsr1",
            Algorithm::Storm1st => "storm_1st",
            Algorithm::Storm2nd => "storm_2nd",
            Algorithm::StormLsr1 => "storm_lsr1",
            Algorithm::AdaGrad => "adagrad",
        }
    }

    /// Radius rule of the trust-region variants; `None` for AdaGrad.
    pub fn rule(self, r1: f64, r2: f64) -> Option<RadiusRule> {
        match self {
            Algorithm::Strme1st | Algorithm::Strme2ndDogleg | Algorithm::StrmeLsr1 => {
                Some(RadiusRule::Power { r1, r2 })
            }
            Algorithm::Storm1st | Algorithm::Storm2nd | Algorithm::StormLsr1 => Some(RadiusRule::Constant),
            Algorithm::AdaGrad => None,
        }
    }

    pub fn model(self, lsr1: Lsr1Params) -> Option<ModelKind> {
        match self {
            Algorithm::Strme1st | Algorithm::Storm1st => Some(ModelKind::FirstOrder),
            Algorithm::Strme2ndDogleg | Algorithm::Storm2nd => Some(ModelKind::SampledHessian),
            Algorithm::StrmeLsr1 | Algorithm::StormLsr1 => Some(ModelKind::Lsr1(lsr1)),
            Algorithm::AdaGrad => None,
        }
    }

    pub fn is_storm(self) -> bool {
        matches!(self, Algorithm::Storm1st | Algorithm::Storm2nd | Algorithm::StormLsr1)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Regularized logistic regression on a LIBSVM file or generated data.
    Logistic,
    /// 784-50-10 perceptron on an IDX directory.
    Mlp,
    /// Noisy quadratic with a prescribed condition number.
    Quadratic,
    /// Noisy 2-d Rosenbrock.
    Rosenbrock,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "logistic" => Ok(ProblemKind::Logistic),
            "mlp" => Ok(ProblemKind::Mlp),
            "quadratic" => Ok(ProblemKind::Quadratic),
            "rosenbrock" => Ok(ProblemKind::Rosenbrock),
            other => Err(Error::Config(format!("unknown problem {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Zero,
    FanIn,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub problem: ProblemKind,
    /// LIBSVM file (logistic) or IDX directory (mlp). Absent: generated data.
    pub dataset: Option<PathBuf>,
    pub test_dataset: Option<PathBuf>,
    pub train_fraction: f64,
    pub split_shuffle: bool,
    pub lambda: f64,
    pub synthetic_n: usize,
    pub synthetic_d: usize,
    pub synthetic_density: f64,
    pub data_seed: u64,
    pub dim: usize,
    pub condition: f64,
    pub noise_v_f: f64,
    pub noise_v_g: f64,
    /// Samples per effective pass for problems without a finite training set.
    pub pass_size: u64,
    pub x0: f64,
    pub init: Option<InitKind>,

    pub algorithm: Algorithm,
    pub seed: u64,
    pub sfo_max_passes: f64,
    pub gamma: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub mu0: f64,
    pub mu_max: f64,
    pub r1: f64,
    pub r2: f64,
    pub max_iter: Option<u64>,

    pub t0: u64,
    /// Base batch size; absent means feature dimension + 1, capped at `b_max`.
    pub b0: Option<u64>,
    /// Batch cap; absent means the training-set size.
    pub b_max: Option<u64>,
    pub chebyshev: bool,
    pub accuracy: AccuracyParams,
    pub estimate_policy: EstimatePolicy,

    pub lsr1: Lsr1Params,
    pub adagrad_eta: f64,
    pub adagrad_eps: f64,
    pub adagrad_batch: Option<u64>,

    pub warm_start_epochs: u32,
    pub warm_start_lr: f64,
    pub warm_start_batch: u64,

    /// Iterations between full evaluations; absent means `ceil(N / (10 b0))`.
    pub eval_every: Option<u64>,
    pub nu: f64,
    pub l_smooth: Option<f64>,
    pub f_star: Option<f64>,
    pub fstar_cache: Option<PathBuf>,
    pub execution: Execution,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            problem: ProblemKind::Logistic,
            dataset: None,
            test_dataset: None,
            train_fraction: 0.95,
            split_shuffle: true,
            lambda: 1e-4,
            synthetic_n: 2000,
            synthetic_d: 50,
            synthetic_density: 0.2,
            data_seed: 1,
            dim: 10,
            condition: 100.0,
            noise_v_f: 0.0,
            noise_v_g: 0.0,
            pass_size: 1000,
            x0: 1.0,
            init: None,
            algorithm: Algorithm::Strme1st,
            seed: 0,
            sfo_max_passes: 20.0,
            gamma: 2.0,
            eta1: 0.1,
            eta2: 0.0,
            mu0: 1.0,
            mu_max: 1e3,
            r1: 1.0,
            r2: 1.0,
            max_iter: None,
            t0: 100,
            b0: None,
            b_max: None,
            chebyshev: false,
            accuracy: AccuracyParams {
                kappa_ef: 1.0,
                kappa_eg: 1.0,
                eps_f: 1.0,
                alpha: 0.9,
                beta: 0.9,
                v_f: 0.0,
                v_g: 0.0,
            },
            estimate_policy: EstimatePolicy::SharedBatch,
            lsr1: Lsr1Params::default(),
            adagrad_eta: 1.0,
            adagrad_eps: 1e-8,
            adagrad_batch: None,
            warm_start_epochs: 0,
            warm_start_lr: 0.1,
            warm_start_batch: 10,
            eval_every: None,
            nu: 0.9,
            l_smooth: None,
            f_star: None,
            fstar_cache: None,
            execution: Execution::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`], in documentation order.
pub const KEYS: &[&str] = &[
    "preset",
    "problem",
    "dataset",
    "test_dataset",
    "train_fraction",
    "split_shuffle",
    "lambda",
    "synthetic_n",
    "synthetic_d",
    "synthetic_density",
    "data_seed",
    "dim",
    "condition",
    "noise_v_f",
    "noise_v_g",
    "pass_size",
    "x0",
    "init",
    "algorithm",
    "seed",
    "sfo_max_passes",
    "gamma",
    "eta1",
    "eta2",
    "mu0",
    "mu_max",
    "delta0",
    "delta_max",
    "r1",
    "r2",
    "max_iter",
    "t0",
    "b0",
    "b_max",
    "batch_mode",
    "kappa_ef",
    "kappa_eg",
    "eps_f",
    "alpha",
    "beta",
    "v_f",
    "v_g",
    "estimate_policy",
    "lsr1_memory",
    "tau0",
    "skip_r",
    "adagrad_eta",
    "adagrad_eps",
    "adagrad_batch",
    "warm_start_epochs",
    "warm_start_lr",
    "warm_start_batch",
    "eval_every",
    "nu",
    "l_smooth",
    "f_star",
    "fstar_cache",
    "execution",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        v => Err(Error::Config(format!("invalid boolean {v:?} for {key}"))),
    }
}

impl ExperimentConfig {
    /// Sets one field by its config-file key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "preset" => self.preset = Some(v.to_string()),
            "problem" => self.problem = v.parse()?,
            "dataset" => self.dataset = parse_opt::<String>(key, v)?.map(PathBuf::from),
            "test_dataset" => self.test_dataset = parse_opt::<String>(key, v)?.map(PathBuf::from),
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "split_shuffle" => self.split_shuffle = parse_bool(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "synthetic_n" => self.synthetic_n = parse(key, v)?,
            "synthetic_d" => self.synthetic_d = parse(key, v)?,
            "synthetic_density" => self.synthetic_density = parse(key, v)?,
            "data_seed" => self.data_seed = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "condition" => self.condition = parse(key, v)?,
            "noise_v_f" => self.noise_v_f = parse(key, v)?,
            "noise_v_g" => self.noise_v_g = parse(key, v)?,
            "pass_size" => self.pass_size = parse(key, v)?,
            "x0" => self.x0 = parse(key, v)?,
            "init" => {
                self.init = match v {
                    "zero" => Some(InitKind::Zero),
                    "fan_in" => Some(InitKind::FanIn),
                    "auto" => None,
                    _ => return Err(Error::Config(format!("invalid init {v:?}"))),
                }
            }
            "algorithm" => self.algorithm = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "sfo_max_passes" => self.sfo_max_passes = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "eta1" => self.eta1 = parse(key, v)?,
            "eta2" => self.eta2 = parse(key, v)?,
            // the radius-based variants store their initial radius and cap in the same fields
            "mu0" | "delta0" => self.mu0 = parse(key, v)?,
            "mu_max" | "delta_max" => self.mu_max = parse(key, v)?,
            "r1" => self.r1 = parse(key, v)?,
            "r2" => self.r2 = parse(key, v)?,
            "max_iter" => self.max_iter = parse_opt(key, v)?,
            "t0" => self.t0 = parse(key, v)?,
            "b0" => self.b0 = parse_opt(key, v)?,
            "b_max" => self.b_max = parse_opt(key, v)?,
            "batch_mode" => {
                self.chebyshev = match v {
                    "linear" => false,
                    "chebyshev" => true,
                    _ => return Err(Error::Config(format!("invalid batch_mode {v:?}"))),
                }
            }
            "kappa_ef" => self.accuracy.kappa_ef = parse(key, v)?,
            "kappa_eg" => self.accuracy.kappa_eg = parse(key, v)?,
            "eps_f" => self.accuracy.eps_f = parse(key, v)?,
            "alpha" => self.accuracy.alpha = parse(key, v)?,
            "beta" => self.accuracy.beta = parse(key, v)?,
            "v_f" => self.accuracy.v_f = parse(key, v)?,
            "v_g" => self.accuracy.v_g = parse(key, v)?,
            "estimate_policy" => {
                self.estimate_policy = match v {
                    "shared" => EstimatePolicy::SharedBatch,
                    "resample" => EstimatePolicy::Resample,
                    _ => return Err(Error::Config(format!("invalid estimate_policy {v:?}"))),
                }
            }
            "lsr1_memory" => self.lsr1.memory = parse(key, v)?,
            "tau0" => self.lsr1.tau0 = parse(key, v)?,
            "skip_r" => self.lsr1.skip_r = parse(key, v)?,
            "adagrad_eta" => self.adagrad_eta = parse(key, v)?,
            "adagrad_eps" => self.adagrad_eps = parse(key, v)?,
            "adagrad_batch" => self.adagrad_batch = parse_opt(key, v)?,
            "warm_start_epochs" => self.warm_start_epochs = parse(key, v)?,
            "warm_start_lr" => self.warm_start_lr = parse(key, v)?,
            "warm_start_batch" => self.warm_start_batch = parse(key, v)?,
            "eval_every" => self.eval_every = parse_opt(key, v)?,
            "nu" => self.nu = parse(key, v)?,
            "l_smooth" => self.l_smooth = parse_opt(key, v)?,
            "f_star" => self.f_star = parse_opt(key, v)?,
            "fstar_cache" => self.fstar_cache = parse_opt::<String>(key, v)?.map(PathBuf::from),
            "execution" => {
                self.execution = match v {
                    "sequential" => Execution::Sequential,
                    #[cfg(feature = "parallel")]
                    "parallel" => Execution::Parallel,
                    _ => return Err(Error::Config(format!("invalid or unavailable execution mode {v:?}"))),
                }
            }
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` pairs in order.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Builds a config from an optional preset, then file pairs, then overrides.
    /// The algorithm is resolved first because presets depend on it.
    pub fn resolve(preset: Option<&str>, file: &[(String, String)], overrides: &[(String, String)]) -> Result<Self> {
        let find =
            |key: &str| overrides.iter().rev().chain(file.iter().rev()).find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let preset = match preset {
            Some(p) => Some(p.to_string()),
            None => find("preset"),
        };
        let algorithm: Option<Algorithm> = find("algorithm").map(|a| a.parse()).transpose()?;
        let mut cfg = ExperimentConfig::default();
        if let Some(name) = &preset {
            let alg = algorithm.unwrap_or(default_algorithm(name)?);
            cfg.apply(preset_pairs(name, alg)?.iter().map(|(k, v)| (*k, v.as_str())))?;
            cfg.preset = Some(name.clone());
        }
        for (k, v) in file.iter().chain(overrides) {
            if k == "preset" {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.sfo_max_passes >= 0.0 && self.sfo_max_passes.is_finite()) {
            return bad(format!("sfo_max_passes must be a finite nonnegative number, got {}", self.sfo_max_passes));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad(format!("nu must lie in (0, 1), got {}", self.nu));
        }
        if self.l_smooth.is_some_and(|l| !(l > 0.0)) {
            return bad("l_smooth must be positive".into());
        }
        if self.pass_size == 0 {
            return bad("pass_size must be positive".into());
        }
        if matches!(self.problem, ProblemKind::Mlp) && self.dataset.is_none() {
            return bad("the mlp problem needs a dataset directory".into());
        }
        if self.chebyshev {
            self.accuracy.validate()?;
        }
        match self.algorithm {
            Algorithm::AdaGrad => {
                if !(self.adagrad_eta > 0.0) {
                    return bad(format!("adagrad_eta must be positive, got {}", self.adagrad_eta));
                }
                if !(self.adagrad_eps >= 0.0) {
                    return bad(format!("adagrad_eps must be nonnegative, got {}", self.adagrad_eps));
                }
            }
            alg => {
                let rule = alg.rule(self.r1, self.r2).expect("trust-region variant");
                self.opt_config(0).validate(rule)?;
                if matches!(alg, Algorithm::StrmeLsr1 | Algorithm::StormLsr1) {
                    crate::lsr1::Lsr1State::new(1, self.lsr1.tau0, self.lsr1.memory, self.lsr1.skip_r)?;
                }
            }
        }
        Ok(())
    }

    pub fn opt_config(&self, sfo_max: u64) -> OptConfig {
        OptConfig {
            gamma: self.gamma,
            eta1: self.eta1,
            eta2: self.eta2,
            mu0: self.mu0,
            mu_max: self.mu_max,
            sfo_max,
            seed: self.seed,
            max_iter: self.max_iter,
        }
    }

    /// Echo of every key with its effective value, for run summaries.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let path = |p: &Option<PathBuf>| opt(p.as_ref().map(|p| p.display().to_string()));
        let mut m = BTreeMap::new();
        m.insert("preset", opt(self.preset.clone()));
        m.insert(
            "problem",
            match self.problem {
                ProblemKind::Logistic => "logistic",
                ProblemKind::Mlp => "mlp",
                ProblemKind::Quadratic => "quadratic",
                ProblemKind::Rosenbrock => "rosenbrock",
            }
            .into(),
        );
        m.insert("dataset", path(&self.dataset));
        m.insert("test_dataset", path(&self.test_dataset));
        m.insert("train_fraction", self.train_fraction.to_string());
        m.insert("split_shuffle", self.split_shuffle.to_string());
        m.insert("lambda", self.lambda.to_string());
        m.insert("synthetic_n", self.synthetic_n.to_string());
        m.insert("synthetic_d", self.synthetic_d.to_string());
        m.insert("synthetic_density", self.synthetic_density.to_string());
        m.insert("data_seed", self.data_seed.to_string());
        m.insert("dim", self.dim.to_string());
        m.insert("condition", self.condition.to_string());
        m.insert("noise_v_f", self.noise_v_f.to_string());
        m.insert("noise_v_g", self.noise_v_g.to_string());
        m.insert("pass_size", self.pass_size.to_string());
        m.insert("x0", self.x0.to_string());
        m.insert(
            "init",
            match self.init {
                None => "auto",
                Some(InitKind::Zero) => "zero",
                Some(InitKind::FanIn) => "fan_in",
            }
            .into(),
        );
        m.insert("algorithm", self.algorithm.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("sfo_max_passes", self.sfo_max_passes.to_string());
        m.insert("gamma", self.gamma.to_string());
        m.insert("eta1", self.eta1.to_string());
        m.insert("eta2", self.eta2.to_string());
        m.insert("mu0", self.mu0.to_string());
        m.insert("mu_max", self.mu_max.to_string());
        m.insert("r1", self.r1.to_string());
        m.insert("r2", self.r2.to_string());
        m.insert("max_iter", opt(self.max_iter.map(|v| v.to_string())));
        m.insert("t0", self.t0.to_string());
        m.insert("b0", opt(self.b0.map(|v| v.to_string())));
        m.insert("b_max", opt(self.b_max.map(|v| v.to_string())));
        m.insert("batch_mode", if self.chebyshev { "chebyshev" } else { "linear" }.into());
        m.insert("kappa_ef", self.accuracy.kappa_ef.to_string());
        m.insert("kappa_eg", self.accuracy.kappa_eg.to_string());
        m.insert("eps_f", self.accuracy.eps_f.to_string());
        m.insert("alpha", self.accuracy.alpha.to_string());
        m.insert("beta", self.accuracy.beta.to_string());
        m.insert("v_f", self.accuracy.v_f.to_string());
        m.insert("v_g", self.accuracy.v_g.to_string());
        m.insert(
            "estimate_policy",
            match self.estimate_policy {
                EstimatePolicy::SharedBatch => "shared",
                EstimatePolicy::Resample => "resample",
            }
            .into(),
        );
        m.insert("lsr1_memory", self.lsr1.memory.to_string());
        m.insert("tau0", self.lsr1.tau0.to_string());
        m.insert("skip_r", self.lsr1.skip_r.to_string());
        m.insert("adagrad_eta", self.adagrad_eta.to_string());
        m.insert("adagrad_eps", self.adagrad_eps.to_string());
        m.insert("adagrad_batch", opt(self.adagrad_batch.map(|v| v.to_string())));
        m.insert("warm_start_epochs", self.warm_start_epochs.to_string());
        m.insert("warm_start_lr", self.warm_start_lr.to_string());
        m.insert("warm_start_batch", self.warm_start_batch.to_string());
        m.insert("eval_every", opt(self.eval_every.map(|v| v.to_string())));
        m.insert("nu", self.nu.to_string());
        m.insert("l_smooth", opt(self.l_smooth.map(|v| v.to_string())));
        m.insert("f_star", opt(self.f_star.map(|v| v.to_string())));
        m.insert("fstar_cache", path(&self.fstar_cache));
        m.insert(
            "execution",
            match self.execution {
                Execution::Sequential => "sequential",
                #[cfg(feature = "parallel")]
                Execution::Parallel => "parallel",
            }
            .into(),
        );
        m.insert("out", self.out.display().to_string());
        debug_assert!(m.keys().all(|k| KEYS.contains(k)));
        m
    }
}

/// Parses flat `key = value` text. Blank lines and `#` comments are ignored.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: lineno + 1, msg: format!("expected key = value, got {raw:?}") })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Parse { line: lineno + 1, msg: format!("unknown key {k:?}") });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}

pub const PRESETS: &[&str] =
    &["a9a", "ijcnn1", "dnn-1st", "dnn-lsr1", "mnist-smoke", "logistic-synthetic", "quadratic", "rosenbrock"];

fn default_algorithm(preset: &str) -> Result<Algorithm> {
    Ok(match preset {
        "a9a" | "ijcnn1" | "logistic-synthetic" => Algorithm::Strme2ndDogleg,
        "dnn-1st" | "quadratic" | "rosenbrock" => Algorithm::Strme1st,
        "dnn-lsr1" | "mnist-smoke" => Algorithm::StrmeLsr1,
        other => return Err(Error::Config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
    })
}

/// Parameter sets of the published experiments, plus small bundled-data variants.
pub fn preset_pairs(name: &str, alg: Algorithm) -> Result<Vec<(&'static str, String)>> {
    default_algorithm(name)?;
    let mut p: Vec<(&'static str, String)> = vec![("algorithm", alg.name().into())];
    let mut put = |k: &'static str, v: &str| p.push((k, v.to_string()));
    let storm = alg.is_storm();
    match name {
        "a9a" | "ijcnn1" | "logistic-synthetic" => {
            put("problem", "logistic");
            put("lambda", "1e-4");
            put("t0", "100");
            put("b0", "auto");
            put("gamma", "2");
            put("eta1", "0.1");
            put("estimate_policy", "resample");
            put("adagrad_eta", "1");
            put("sfo_max_passes", "20");
            put("init", "zero");
            put("train_fraction", if name == "ijcnn1" { "0.75" } else { "0.95" });
            if storm {
                put("delta0", "1");
                put("delta_max", "10");
                put("eta2", "0.001");
            } else {
                let first = matches!(alg, Algorithm::Strme1st);
                put("mu0", if name == "ijcnn1" && first { "10" } else { "1" });
                put("mu_max", "1000");
            }
            if name == "logistic-synthetic" {
                put("dataset", "none");
                put("synthetic_n", "2000");
                put("synthetic_d", "50");
            }
        }
        "dnn-1st" | "dnn-lsr1" | "mnist-smoke" => {
            put("problem", "mlp");
            put("lambda", "1e-3");
            put("t0", "10");
            put("b0", "auto");
            put("gamma", "2");
            put("eta1", "0.1");
            put("estimate_policy", "shared");
            put("init", "fan_in");
            put("sfo_max_passes", "30");
            put("lsr1_memory", "30");
            put("tau0", "1");
            let lsr1 = matches!(alg, Algorithm::StrmeLsr1 | Algorithm::StormLsr1);
            if storm {
                put("delta0", "0.1");
                put("delta_max", "1");
                put("eta2", "0.001");
            } else {
                put("mu0", "0.1");
                put("mu_max", if lsr1 || name != "dnn-1st" { "10" } else { "2" });
            }
            if name == "mnist-smoke" {
                put("dataset", "data/mnist-subset");
                put("b0", "100");
                put("eval_every", "5");
            } else {
                put("warm_start_epochs", "1");
            }
        }
        "quadratic" | "rosenbrock" => {
            put("problem", name);
            put("t0", "0");
            put("b0", "1");
            put("gamma", "2");
            put("eta1", "0.1");
            put("estimate_policy", "resample");
            put("init", "zero");
            put("sfo_max_passes", "100");
            if name == "quadratic" {
                put("dim", "10");
                put("condition", "100");
                put("noise_v_f", "0.01");
                put("noise_v_g", "0.01");
                put("x0", "1");
            } else {
                put("noise_v_f", "1e-4");
                put("noise_v_g", "1e-4");
            }
            if storm {
                put("delta0", "1");
                put("delta_max", "10");
                put("eta2", "0.001");
            } else {
                put("mu0", "1");
                put("mu_max", "1000");
            }
        }
        _ => unreachable!("checked by default_algorithm"),
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config_text("gamma = 2\nbogus = 1\n").is_err());
        let mut c = ExperimentConfig::default();
        assert!(c.set("bogus", "1").is_err());
    }

    #[test]
    fn parses_comments_and_blanks() {
        let kv = parse_config_text("# header\n\nalgorithm = storm_1st  # trailing\nseed=7\n").unwrap();
        assert_eq!(kv, pairs(&[("algorithm", "storm_1st"), ("seed", "7")]));
        assert!(parse_config_text("no equals sign").is_err());
    }

    #[test]
    fn presets_follow_algorithm_family() {
        let c = ExperimentConfig::resolve(Some("a9a"), &[], &pairs(&[("algorithm", "storm_1st")])).unwrap();
        assert_eq!((c.mu0, c.mu_max, c.eta2), (1.0, 10.0, 0.001));
        let c = ExperimentConfig::resolve(Some("ijcnn1"), &[], &pairs(&[("algorithm", "strme_1st")])).unwrap();
        assert_eq!((c.mu0, c.mu_max, c.train_fraction), (10.0, 1000.0, 0.75));
        let c = ExperimentConfig::resolve(Some("dnn-lsr1"), &[], &pairs(&[("dataset", "x")])).unwrap();
        assert_eq!(c.algorithm, Algorithm::StrmeLsr1);
        assert_eq!((c.mu0, c.mu_max, c.lsr1.memory, c.lsr1.tau0), (0.1, 10.0, 30, 1.0));
        let c = ExperimentConfig::resolve(Some("dnn-1st"), &[], &pairs(&[("dataset", "x")])).unwrap();
        assert_eq!((c.mu0, c.mu_max, c.t0), (0.1, 2.0, 10));
    }

    #[test]
    fn file_then_overrides() {
        let file = pairs(&[("seed", "3"), ("mu0", "0.5")]);
        let over = pairs(&[("seed", "9")]);
        let c = ExperimentConfig::resolve(Some("quadratic"), &file, &over).unwrap();
        assert_eq!((c.seed, c.mu0), (9, 0.5));
        assert!(ExperimentConfig::resolve(Some("nope"), &[], &[]).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        assert!(ExperimentConfig::resolve(None, &pairs(&[("gamma", "1")]), &[]).is_err());
        assert!(ExperimentConfig::resolve(None, &pairs(&[("train_fraction", "1")]), &[]).is_err());
        let strme_eta2 = pairs(&[("eta2", "0.01"), ("mu_max", "1000")]);
        assert!(ExperimentConfig::resolve(None, &strme_eta2, &[]).is_err());
        assert!(ExperimentConfig::resolve(None, &pairs(&[("problem", "mlp")]), &[]).is_err());
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("STRME-LSR1".parse::<Algorithm>().unwrap(), Algorithm::StrmeLsr1);
    }

    #[test]
    fn echo_covers_known_keys_only() {
        let echo = ExperimentConfig::default().echo();
        assert!(echo.keys().all(|k| KEYS.contains(k)));
    }
}
