use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tsi_harness::config::{builtin_config, ExperimentConfig};

fn tsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsi")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn export_config_round_trips() {
    let o = tsi(&["export-config", "ramps_7_2"]);
    assert!(o.status.success());
    let parsed = ExperimentConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(parsed, builtin_config("ramps_7_2").unwrap());
}

#[test]
fn zero_step_run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = tsi(&["run", "step_7_1", "--out", out.to_str().unwrap(), "--steps", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "summary.csv", "compare.csv", "reconstruction_0.csv", "transform_0.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let trace = fs::read_to_string(out.join("trace_laplace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    assert!(stdout(&o).contains("laplace"));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = tsi(&[
        "run",
        "step_7_1",
        "--out",
        out.to_str().unwrap(),
        "--steps",
        "2",
        "--step-size",
        "0.05",
        "--smoother",
        "laplace",
        "--objective",
        "sup",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(c.objective, "sup");
    assert!(!c.variants.is_empty());
    for v in &c.variants {
        assert_eq!((v.smoother.as_str(), v.steps, v.step), ("laplace", 2, 0.05));
    }
    assert_eq!(fs::read_to_string(out.join("trace_laplace.csv")).unwrap().lines().count(), 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = tsi(&["run", "no_such_builtin", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = 3\n[[variant]]\n").unwrap();
    let o = tsi(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    assert_eq!(tsi(&["export-config", "nope"]).status.code(), Some(2));
    assert_eq!(tsi(&["run"]).status.code(), Some(2));
}

#[test]
fn singular_fields_exit_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = builtin_config("ramps_7_2").unwrap().with_overrides(Some(1), None, Some("laplace"), None).unwrap();
    c.variants[0].field_nodes = Some(vec![0.6, 0.6 + 1e-13]);
    let cfg = dir.path().join("singular.toml");
    fs::write(&cfg, c.to_toml()).unwrap();
    let out = dir.path().join("r");
    let o = tsi(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

fn trained_run(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("r");
    let o = tsi(&["run", "ramps_7_2", "--out", out.to_str().unwrap(), "--steps", "3", "--smoother", "laplace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn stability_reports_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = trained_run(dir.path());
    let o = tsi(&["stability", out.to_str().unwrap(), "--perturb", "0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("holds = true"), "{text}");
    assert!(text.contains("lebesgue"));

    let o = tsi(&["stability", out.to_str().unwrap(), "--perturb", "0.01", "--variant", "missing"]);
    assert_eq!(o.status.code(), Some(2));
}
