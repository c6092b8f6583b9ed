use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn gorder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gorder"))
        .args(args)
        .env("GORDER_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = gorder(args);
    let code = out.status.code().unwrap();
    let v = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}); stderr: {}", String::from_utf8_lossy(&out.stderr)));
    (code, v)
}

fn differences(v: &Value) -> Vec<f64> {
    v["empirical"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["difference"].as_f64().unwrap())
        .collect()
}

#[test]
fn solve_black_scholes_call() {
    let f = scenario("black_scholes.json");
    let (code, v) = run_json(&["solve", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    let d1 = (0.05 + 0.5 * 0.2 * 0.2) / 0.2;
    let d2 = d1 - 0.2;
    let n = |x: f64| 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let bs = 100.0 * n(d1) - 100.0 * (-0.05f64).exp() * n(d2);
    let got = v["g_expectation"].as_f64().unwrap();
    assert!((got - bs).abs() < 5e-3 * bs, "{got}");
    assert_eq!(v["tool"]["name"], "gorder");
    assert_eq!(v["engine"], "pde");
}

#[test]
fn solve_writes_report_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/bs.json");
    let f = scenario("black_scholes.json");
    let o = gorder(&["solve", f.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["command"], "solve");
    let grid = std::fs::read_to_string(dir.path().join("nested/bs.grid.csv")).unwrap();
    assert!(grid.lines().count() > 100);
}

#[test]
fn unknown_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let text = std::fs::read_to_string(scenario("black_scholes.json")).unwrap();
    std::fs::write(&p, text.replace("\"horizon\"", "\"horizen\": 2, \"horizon\"")).unwrap();
    let o = gorder(&["solve", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizen"));
    let o = gorder(&["solve", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_misspecified_volatility() {
    let f = scenario("misspecified_vol.json");
    let (code, v) = run_json(&["compare", f.to_str().unwrap(), "--order", "conv"]);
    assert_eq!(code, 0);
    assert_eq!(v["applied_result"], "pp3");
    assert_eq!(v["order_type"], "conv");
    assert!(differences(&v).iter().all(|d| *d >= -1e-3));
}

#[test]
fn reversed_volatilities_have_no_verdict() {
    let f = scenario("reversed_vol.json");
    let (code, v) = run_json(&["compare", f.to_str().unwrap(), "--order", "conv"]);
    assert_eq!(code, 1);
    assert!(v["applied_result"].is_null());
    assert_eq!(v["order_type"], "none");
    let (code, v) = run_json(&["compare", f.to_str().unwrap(), "--order", "conc"]);
    assert_eq!(code, 0);
    assert_eq!(v["via_duality"], true);
}

#[test]
fn identical_problems_give_zero_differences() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("same.json");
    let text = std::fs::read_to_string(scenario("misspecified_vol.json")).unwrap();
    std::fs::write(&p, text.replace("0.3*x", "0.2*x")).unwrap();
    let (code, v) = run_json(&["compare", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["applied_result"], "pp3");
    assert!(differences(&v).iter().all(|d| *d == 0.0));
}

#[test]
fn example_misspecified_vol_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mv.json");
    let o = gorder(&["example", "misspecified_vol", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["verdict_matches"], true);
    assert_eq!(v["verdict"]["applied_result"], "pp3");
    for s in ["curves1.csv", "curves2.csv", "empirical.csv"] {
        assert!(dir.path().join(format!("mv.{s}")).exists(), "{s}");
    }
}

#[test]
fn equal_rates_remove_the_borrowing_gap() {
    let (code, v) = run_json(&["example", "borrow_one_side", "--params", "R=0.05"]);
    assert_eq!(code, 0);
    assert!(differences(&v).iter().all(|d| d.abs() < 1e-9), "{:?}", differences(&v));
}

#[test]
fn parameter_violation_exits_2() {
    let o = gorder(&["example", "short_sell", "--params", "theta_gap=-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));
    let o = gorder(&["example", "borrow_both", "--params", "nope=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gorder(&["example", "not_a_scenario"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn probes_report_extrema() {
    let f = scenario("heat.json");
    let (code, v) = run_json(&["probe", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    let probes = v["probes"].as_array().unwrap();
    assert_eq!(probes.len(), 3);
    // u = x^2 + (T - t) has u_xx = 2 everywhere.
    assert_eq!(probes[0]["probe"], "convexity");
    assert!((probes[0]["min_value"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert_eq!(probes[1]["pass"], false);
    assert!(probes[2]["first_mixed"].is_null());
    let (_, v) = run_json(&["probe", f.to_str().unwrap(), "--probe", "monotonicity"]);
    assert_eq!(v["probes"].as_array().unwrap().len(), 1);
}

#[test]
fn validate_reports_assumptions() {
    let f = scenario("borrowing.json");
    let (code, v) = run_json(&["validate", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["problems"].as_array().unwrap().len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("degenerate.json");
    let text = std::fs::read_to_string(scenario("heat.json")).unwrap();
    std::fs::write(&p, text.replace("\"sigma\": \"1\"", "\"sigma\": \"0\"")).unwrap();
    let o = gorder(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let f = scenario("borrowing.json");
    let args = ["compare", f.to_str().unwrap(), "--engine", "mc", "--seed", "11"];
    let a = gorder(&args);
    let b = gorder(&args);
    assert_eq!(a.status.code(), b.status.code());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}
