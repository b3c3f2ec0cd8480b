//! End-to-end checks of the command-line binary.

use std::process::{Command, Output};

use serde_json::Value;

fn polymag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polymag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON record")
}

#[test]
fn moment_of_drifted_brownian_motion() {
    let out = polymag(&[
        "moment", "--builtin", "bm-drift", "--param", "a=t", "--s", "0", "--t", "1", "--x", "0",
        "--k", "1",
    ]);
    let v = json_of(&out);
    assert_eq!(v["command"], "moment");
    let m = v["result"]["moment"].as_f64().unwrap();
    assert!((m - 0.5).abs() < 1e-12, "got {m}");
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn moment_at_equal_times_is_the_monomial() {
    let out = polymag(&[
        "moment", "--builtin", "ou-theta-t", "--s", "0.5", "--t", "0.5", "--x", "0.7", "--k", "2",
    ]);
    let m = json_of(&out)["result"]["moment"].as_f64().unwrap();
    assert_eq!(m, 0.7 * 0.7);
}

#[test]
fn counterexample_exits_with_numerical_error() {
    let out = polymag(&[
        "moment",
        "--builtin",
        "quadratic-drift-counterexample",
        "--t",
        "1",
        "--x",
        "0",
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degree"), "stderr: {err}");
}

#[test]
fn unknown_builtin_is_a_spec_error() {
    let out = polymag(&["matrix", "--builtin", "no-such-process", "--t", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generator_matrix_of_the_mean_reverting_process() {
    let out = polymag(&[
        "matrix", "--builtin", "ou-theta-t", "--param", "theta=1", "--t", "0.5", "--k", "2",
    ]);
    let v = json_of(&out);
    let want = serde_json::json!([[0.0, 0.5, 1.0], [0.0, -1.0, 1.0], [0.0, 0.0, -2.0]]);
    assert_eq!(v["result"]["h"], want);
    assert_eq!(v["result"]["basis"][1], "x1");
}

#[test]
fn spec_file_round_trip_through_the_cli() {
    let doc = "\
[meta]
d = 1
m = 2
horizon = 2
state_space = full

[drift]
1: t - x1

[diffusion]
1 1: 1
";
    let path = std::env::temp_dir().join("polymag-cli-test-spec.txt");
    std::fs::write(&path, doc).unwrap();
    let out = polymag(&[
        "moment",
        path.to_str().unwrap(),
        "--s",
        "0",
        "--t",
        "1",
        "--x",
        "0.25",
        "--k",
        "1",
    ]);
    let m = json_of(&out)["result"]["moment"].as_f64().unwrap();
    // dX = (t - X) dt + dW has E[X_t | X_0 = x] = x e^{-t} + t - 1 + e^{-t}
    let want = 0.25 * (-1.0_f64).exp() + (-1.0_f64).exp();
    assert!((m - want).abs() < 1e-9, "{m} vs {want}");
}

#[test]
fn csv_output_has_header_and_one_row() {
    let out = polymag(&[
        "moment", "--builtin", "bm-drift", "--t", "1", "--x", "0", "--k", "1", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let values: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), values.len());
    let col = header.iter().position(|h| *h == "result.moment").unwrap();
    let m: f64 = values[col].parse().unwrap();
    assert!((m - 1.0).abs() < 1e-12); // default drift a(t) = 1
}

#[test]
fn normcheck_reports_the_gate() {
    let out = polymag(&["normcheck", "--builtin", "ou-theta-t", "--t", "1", "--k", "2"]);
    let v = json_of(&out);
    assert_eq!(v["result"]["verdict"], "pass");
    assert!(v["result"]["norm_integral"].as_f64().unwrap() > 0.0);
}

#[test]
fn magnus_terms_are_reported() {
    let out = polymag(&["magnus", "--builtin", "ou-theta-t", "--t", "1", "--k", "2"]);
    let v = json_of(&out);
    // omega2[0][1] = theta (t-s)^3 / 12 at theta = 1, (s,t) = (0,1)
    let o2 = v["result"]["omega2"][0][1].as_f64().unwrap();
    assert!((o2 - 1.0 / 12.0).abs() < 1e-9, "got {o2}");
    assert_eq!(v["diagnostics"]["method"], "magnus3");
}

#[test]
fn validate_passes_on_the_jump_diffusion() {
    let out = polymag(&[
        "validate",
        "--builtin",
        "jacobi-jumps",
        "--t",
        "1",
        "--x",
        "0.5",
        "--kmax",
        "2",
    ]);
    let v = json_of(&out);
    assert_eq!(v["result"]["verdict"], "pass");
    assert_eq!(v["result"]["invariants"]["state_space_preserved"], true);
}

#[test]
fn help_exits_cleanly() {
    let out = polymag(&["--help"]);
    assert!(out.status.success());
}
