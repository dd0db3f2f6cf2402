//! Experiment harness: configuration, diagnostics, the AdaGrad baseline,
//! reference optima and the experiment runner behind the command-line tool.

pub mod adagrad;
pub mod check;
pub mod config;
pub mod diagnostics;
pub mod experiment;
pub mod fstar;

pub use adagrad::{adagrad_step, run_adagrad, AdaGradConfig};
pub use check::{run_selfcheck, CheckResult};
pub use config::{parse_config_text, read_config_file, Algorithm, ExperimentConfig, ProblemKind, PRESETS};
pub use diagnostics::{
    compute_phi, measure_stopping_time, running_success_fail_ratio, success_fail_ratio, DiagnosticPoint,
    DiagnosticsConfig, StoppingCriterion,
};
pub use experiment::{execute_experiment, run_experiment, ExperimentReport, MetricsRow, TRACE_HEADER};
pub use fstar::{fstar_with_cache, solve_fstar, FStar};
