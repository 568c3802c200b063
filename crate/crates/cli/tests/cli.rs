use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_di-toolkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["mu-opt", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
}

#[test]
fn computation_error_exit_code() {
    let out = run(&["threshold-bound", "--game", "chsh", "--n", "1000", "--beta", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires n >="));
    assert_eq!(run(&["ns-value", "--game", "/nonexistent/game.json"]).status.code(), Some(1));
}

#[test]
fn mu_opt_figure_point() {
    let v = json(&run(&[
        "mu-opt", "--n", "1e8", "--gamma", "1", "--omega-exp", "0.820736", "--delta-est", "1e-3", "--eps-s", "1e-6",
        "--eps-e", "1e-6",
    ]));
    assert!((v["value"].as_f64().unwrap() - 0.502133).abs() < 2e-3);
    for key in ["best_cut", "f_min", "slope", "penalty"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn ns_value_builtin_and_file() {
    let v = json(&run(&["ns-value", "--game", "chsh"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["d"], 16);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let game = serde_json::json!({
        "a_size": 2, "b_size": 2, "x_size": 2, "y_size": 2,
        "q": [[0.25, 0.25], [0.25, 0.25]],
        "win": [[[[1, 1], [1, 0]], [[0, 0], [0, 1]]], [[[0, 0], [0, 1]], [[1, 1], [1, 0]]]]
    });
    std::fs::write(&path, game.to_string()).unwrap();
    let v = json(&run(&["ns-value", "--game", path.to_str().unwrap()]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn entropy_curve_csv() {
    let out = run(&["entropy-curve", "--from", "0.75", "--to", "0.853553", "--points", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,secrecy_bound,bell_diag_bound"));
    assert_eq!(lines.count(), 5);
    let json_out = json(&run(&["entropy-curve", "--points", "2", "--out", "json"]));
    assert_eq!(json_out.as_array().unwrap().len(), 2);
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--n", "10000", "--gamma", "0.1", "--omega-exp", "0.81", "--delta-est", "0.02", "--trials", "50",
        "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert!(v["abort_freq"].is_number() && v["ci"].is_array() && v["hoeffding_bound"].is_number());
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = ["definetti-verify", "--n", "1", "--trials", "20", "--seed", "3"];
    let a = bin().args(args).env("DI_TOOLKIT_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("DI_TOOLKIT_THREADS", "3").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["holds"], true);
    assert_eq!(v["factor"], 4096.0);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"n": 1e8, "gamma": 1, "omega_exp": 0.820736, "delta_est": 1e-3, "eps_s": 1e-6, "eps_e": 1e-6}"#)
        .unwrap();
    let v = json(&run(&["mu-opt", "--config", cfg.to_str().unwrap()]));
    assert!((v["value"].as_f64().unwrap() - 0.502133).abs() < 2e-3);
    let out_path = dir.path().join("out.json");
    let o = run(&["mu-opt", "--config", cfg.to_str().unwrap(), "-o", out_path.to_str().unwrap()]);
    assert!(o.status.success() && o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert!(v["value"].is_number());
}

#[test]
fn sig_test_on_signalling_data() {
    // b = x on every round, inputs cycling through all four pairs
    let n = 400;
    let x: Vec<usize> = (0..n).map(|i| (i / 2) % 2).collect();
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let data = serde_json::json!({
        "a_size": 2, "b_size": 2, "x_size": 2, "y_size": 2,
        "q": [[0.25, 0.25], [0.25, 0.25]],
        "a": vec![0; n], "b": x.clone(), "x": x, "y": y
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    std::fs::write(&path, data.to_string()).unwrap();
    let v = json(&run(&["sig-test", "--data", path.to_str().unwrap(), "--zeta", "0.06", "--eps", "0.008"]));
    assert_eq!(v["any_detected"], true);
    assert_eq!(v["results"].as_array().unwrap().len(), 16);
    let one = json(&run(&[
        "sig-test", "--data", path.to_str().unwrap(), "--zeta", "0.06", "--eps", "0.008", "--direction", "ab", "--x", "0",
        "--y", "0", "--outcome", "0",
    ]));
    assert!((one["results"][0]["sig"].as_f64().unwrap() - 0.125).abs() < 1e-12);
}

#[test]
fn rate_curve_csv_header() {
    let out = run(&["rate-curve", "--mode", "block", "--axis", "n", "--q", "0.005", "--values", "1e10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("axis_value,status,rate,rate_clamped,key_length,gamma,delta_est,cut"));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "ok");
    let rate: f64 = row[2].parse().unwrap();
    assert!((rate - 0.810984).abs() < 0.01);
}
