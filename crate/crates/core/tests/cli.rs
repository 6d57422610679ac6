use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_arnold-cert"));
    c.env("ARNOLD_CERT_THREADS", "1");
    c
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("arnold-cert-cli-{}-{name}", std::process::id()))
}

fn run(args: &[&str]) -> (i32, Value, Output) {
    let out = bin().args(args).output().unwrap();
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v, out)
}

#[test]
fn certify_then_check_round_trip() {
    let file = tmp("cert.json");
    let f = file.to_str().unwrap();
    let (code, _, _) = run(&["certify-mixing", "--tau", "0.3", "--eps", "0.9", "--xi", "1", "--n", "32", "-o", f]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(v["command"], "certify-mixing");
    assert_eq!(v["status"], "ok");
    for key in ["code_version", "timestamp", "wall_time_s", "threads", "config"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let (code, v, _) = run(&["check", f]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["kind"], "mixing");
    std::fs::remove_file(file).unwrap();
}

#[test]
fn cover_then_check_round_trip() {
    let file = tmp("cover.json");
    let f = file.to_str().unwrap();
    let args = ["cover", "--eps", "1.4", "--xi", "0.1", "--tau", "0.75:0.7505", "--n", "256", "-o", f];
    assert_eq!(run(&args).0, 0);
    let (code, v, _) = run(&["check", f]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["kind"], "coverage");
    std::fs::remove_file(file).unwrap();
}

#[test]
fn invalid_parameters_exit_with_error() {
    let (code, _, out) = run(&["rotation", "--tau", "0.3", "--eps", "-1", "--xi", "0.1"]);
    assert_eq!(code, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(run(&["no-such-command"]).0, 1);
    assert_eq!(run(&["check", "/nonexistent/file.json"]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn monotone_profile_is_inconclusive() {
    let args = ["prove-nonmonotone", "--eps", "0", "--xi", "0.1", "--tau", "0.3:0.32:0.01", "--n", "256", "--coarse", "64"];
    let (code, v, _) = run(&args);
    assert_eq!(code, 2);
    assert_eq!(v["status"], "inconclusive");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let cfg = tmp("run.conf");
    std::fs::write(&cfg, "# defaults\ntau = 0.3\neps = 0.0\nxi = 0.5\nn = 64\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (code, v, _) = run(&["rotation", "--config", c, "--coarse", "32", "--tau", "0.25"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["config"]["rotation"]["map"]["tau"], 0.25);
    assert_eq!(v["config"]["rotation"]["grid"]["cells"], 64);
    let lo: f64 = v["result"]["value"]["lo"].as_str().unwrap().parse().unwrap();
    let hi: f64 = v["result"]["value"]["hi"].as_str().unwrap().parse().unwrap();
    assert!(lo <= 0.25 && 0.25 <= hi, "{}", v["result"]);
    std::fs::remove_file(cfg).unwrap();
}

#[test]
fn sweep_writes_csv() {
    let csv = tmp("sweep.csv");
    let args = ["sweep-rotation", "--eps", "0", "--xi", "0.2", "--tau", "0.1:0.3:0.1", "--n", "128", "--coarse", "32"];
    let out = bin().args(args).arg("--csv").arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,eps,xi,N,rho_lo,rho_hi,status");
    assert_eq!(lines.len(), 4);
    std::fs::remove_file(csv).unwrap();
}
