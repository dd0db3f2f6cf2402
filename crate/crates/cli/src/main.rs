use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::warn;

use stochtr::harness::config::{read_config_file, ExperimentConfig, ProblemKind, KEYS, PRESETS};
use stochtr::harness::experiment::{fstar_cache_path, fstar_key, load_problem, run_experiment, LoadedProblem};
use stochtr::harness::{fstar_with_cache, run_selfcheck};

#[derive(Parser)]
#[command(name = "stochtr", version, about = "Stochastic trust-region experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv and summary.json.
    Run(ConfigArgs),
    /// Run the built-in solver, sampling and determinism checks.
    Check {
        /// Use the larger instance counts.
        #[arg(long)]
        full: bool,
    },
    /// Compute and cache the reference optimum of a logistic configuration.
    Fstar(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Named parameter set applied before the config file.
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sfo_max_passes: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => read_config_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => Vec::new(),
        };
        let mut over: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| over.push((k.to_string(), v));
        if let Some(a) = &self.algorithm {
            put("algorithm", a.clone());
        }
        if let Some(d) = &self.dataset {
            put("dataset", d.display().to_string());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        if let Some(p) = self.sfo_max_passes {
            put("sfo_max_passes", p.to_string());
        }
        if let Some(o) = &self.out {
            put("out", o.display().to_string());
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            if !KEYS.contains(&k.trim()) {
                bail!("unknown key {:?}", k.trim());
            }
            put(k.trim(), v.trim().to_string());
        }
        if let Some(p) = &self.preset {
            if !PRESETS.contains(&p.as_str()) {
                bail!("unknown preset {p:?}; known: {}", PRESETS.join(", "));
            }
        }
        Ok(ExperimentConfig::resolve(self.preset.as_deref(), &file, &over)?)
    }
}

fn fstar(cfg: &ExperimentConfig) -> Result<f64> {
    if cfg.problem != ProblemKind::Logistic {
        bail!("reference solves apply to logistic problems; synthetic optima are analytic");
    }
    let problem = load_problem(cfg)?;
    let LoadedProblem::Logistic { train, .. } = &problem else { unreachable!() };
    let cache = fstar_cache_path(cfg);
    let entry = fstar_with_cache(train, cache.as_deref(), &fstar_key(cfg), cfg.execution)?;
    Ok(entry.f_star)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            if cfg.problem == ProblemKind::Logistic && cfg.f_star.is_none() {
                if let Err(e) = fstar(&cfg) {
                    warn!("no reference optimum, phi will be empty: {e:#}");
                }
            }
            let report = run_experiment(&cfg, None)?;
            let s = &report.summary;
            println!(
                "{} seed {}: {} iterations ({} successful), {:.2} passes, train loss {:.6}{}",
                s.algorithm,
                s.seed,
                s.iterations,
                s.successes,
                s.effective_passes,
                s.final_train_loss,
                s.final_test_accuracy.map(|a| format!(", test accuracy {:.4}", a)).unwrap_or_default()
            );
            println!("wrote {}", cfg.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { full } => {
            let results = run_selfcheck(!full)?;
            let mut ok = true;
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Fstar(args) => {
            let cfg = args.resolve()?;
            let f = fstar(&cfg)?;
            println!("f* = {f:.15e}");
            if let Some(p) = fstar_cache_path(&cfg) {
                println!("cached in {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
