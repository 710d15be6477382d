use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gpcinfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpcinfer"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gpcinfer(&["simulate", "--out", path(out), "--seed", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["data.csv", "field.csv", "provenance.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let data = fs::read_to_string(a.join("data.csv")).unwrap();
    assert!(data.starts_with("z,t,y"));
}

#[test]
fn optimize_writes_a_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, "[bo]\nB = 2\nn_candidates = 300\n").unwrap();
    let out = dir.path().join("run");
    let o = gpcinfer(&["optimize", "--mode", "bo", "--config", path(&cfg), "--out", path(&out), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "estimate.csv", "trace.csv", "data.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 7);

    let plots = dir.path().join("plots");
    let o = gpcinfer(&["plotdata", "--run", path(&out), "--out", path(&plots)]);
    assert!(o.status.success());
    assert!(plots.join("bo_trace.csv").is_file());
}

#[test]
fn unknown_method_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpcinfer(&["infer", "--method", "magic", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown method"));
}

#[test]
fn missing_run_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpcinfer(&["plotdata", "--run", path(&dir.path().join("absent")), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[bo]\ntau = -1.0\n").unwrap();
    let o = gpcinfer(&["simulate", "--config", path(&cfg), "--out", path(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = gpcinfer(&["simulate", "--config", path(&cfg), "--out", path(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_subcommands() {
    let o = gpcinfer(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["simulate", "fit-gp", "infer", "optimize", "experiment", "plotdata"] {
        assert!(text.contains(sub), "{sub}");
    }
    assert_eq!(gpcinfer(&["bogus"]).status.code(), Some(2));
}
