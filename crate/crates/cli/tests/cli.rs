use std::process::Command;

fn stochtr() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stochtr"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small noisy quadratic\nproblem = quadratic\ndim = 4\npass_size = 100\n").unwrap();
    let out = dir.path().join("out");
    let status = stochtr()
        .args(["run", "--config", cfg.to_str().unwrap(), "--algorithm", "strme-1st", "--seed", "3"])
        .args(["--sfo-max-passes", "3", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "k,effective_passes,train_loss,test_accuracy,delta,mu,rho,success,grad_norm_model,batch_size,phi,varsigma,is_eval_row"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["dim"], "4");
    assert_eq!(summary["seed"], 3);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "problem = quadratic\nstep_size = 0.1\n").unwrap();
    let out = stochtr().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step_size"));
}

#[test]
fn check_passes() {
    let out = stochtr().arg("check").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 5);
}
