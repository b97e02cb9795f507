//! End-to-end tests of the `qlam` binary.

use std::io::Write;
use std::process::{Command, Output};

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

fn qlam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlam"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_prints_epr_type() {
    let f = write_temp(r"\<x,y>. CNOT ((H x) * y)");
    let out = qlam(&["check", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "B * B -o B * B");
}

#[test]
fn check_rejects_nonlinear_term() {
    let f = write_temp(r"\x. x x");
    let out = qlam(&["check", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_rejects_empty_file() {
    let f = write_temp("");
    let out = qlam(&["check", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_missing_file_fails() {
    let out = qlam(&["check", "/nonexistent/term.qlam"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_open_term_with_env() {
    let f = write_temp("H x");
    let out = qlam(&["check", f.path().to_str().unwrap(), "--env", "x:B"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "B");
}

#[test]
fn run_epr_applied_reports_amplitudes() {
    let f = write_temp(r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)");
    let out = qlam(&["run", f.path().to_str().unwrap(), "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let reg = report["register"].as_array().unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let expected = [0.0, s, s, 0.0];
    for (amp, want) in reg.iter().zip(expected) {
        assert!((amp[0].as_f64().unwrap() - want).abs() < 1e-9);
        assert_eq!(amp[1].as_f64().unwrap(), 0.0);
    }
    assert_eq!(report["oracle"]["agrees"], serde_json::json!(true));
    assert_eq!(report["circuit"][0]["gate"], "H");
    assert_eq!(report["circuit"][1]["gate"], "CNOT");
}

#[test]
fn run_bit_pair_is_trivial() {
    let f = write_temp("|0>_1 * |1>_2");
    let out = qlam(&["run", f.path().to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let reg = report["register"].as_array().unwrap();
    assert_eq!(reg[1][0].as_f64().unwrap(), 1.0);
    assert!(report["circuit"].as_array().unwrap().is_empty());
}

#[test]
fn run_abstraction_with_input() {
    let f = write_temp(r"\<x,y>. CNOT ((H x) * y)");
    let out = qlam(&["run", f.path().to_str().unwrap(), "--input", "00", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let reg = report["register"].as_array().unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((reg[0][0].as_f64().unwrap() - s).abs() < 1e-9);
    assert!((reg[3][0].as_f64().unwrap() - s).abs() < 1e-9);
}

#[test]
fn run_requires_matching_input_arity() {
    let f = write_temp(r"\<x,y>. CNOT ((H x) * y)");
    let missing = qlam(&["run", f.path().to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    let short = qlam(&["run", f.path().to_str().unwrap(), "--input", "0"]);
    assert_eq!(short.status.code(), Some(1));
}

#[test]
fn trace_replay_reproduces_final_register() {
    let f = write_temp(r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)");
    let out = qlam(&["run", f.path().to_str().unwrap(), "--trace"]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    let gates: Vec<&str> = lines
        .iter()
        .filter_map(|l| l["gate"].as_str())
        .collect();
    assert_eq!(gates, ["H", "CNOT"]);
    // Non-gate lines carry an unchanged register; gate lines change it.
    let final_reg = lines.last().unwrap()["register"].clone();
    let last_gate_reg = lines
        .iter()
        .rev()
        .find(|l| l["gate"].is_string())
        .unwrap()["register"]
        .clone();
    assert_eq!(final_reg, last_gate_reg);
}

#[test]
fn mll_sequent_for_epr_term() {
    let f = write_temp(r"\<x,y>. CNOT ((H x) * y)");
    let out = qlam(&["mll", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "|- ((a^ @ a^) @ (a * a))");
}

#[test]
fn mll_sequent_for_bit_pair() {
    let f = write_temp("|0> * |1>");
    let out = qlam(&["mll", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "|- a^, a^, (a * a)");
}

#[test]
fn mll_sequent_for_open_term() {
    let f = write_temp("H x");
    let out = qlam(&["mll", f.path().to_str().unwrap(), "--env", "x:B"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "|- a^, a");
}

#[test]
fn custom_gates_load_from_config() {
    let term = write_temp("G |0>");
    let gates = write_temp(
        r#"{"G": {"arity": 1, "matrix": [[[0.0,0.0],[1.0,0.0]],[[1.0,0.0],[0.0,0.0]]]}}"#,
    );
    let out = qlam(&[
        "run",
        term.path().to_str().unwrap(),
        "--gates",
        gates.path().to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["register"][1][0].as_f64().unwrap(), 1.0);
}

#[test]
fn non_unitary_gate_config_rejected() {
    let term = write_temp("G |0>");
    let gates = write_temp(
        r#"{"G": {"arity": 1, "matrix": [[[1.0,0.0],[1.0,0.0]],[[1.0,0.0],[1.0,0.0]]]}}"#,
    );
    let out = qlam(&[
        "run",
        term.path().to_str().unwrap(),
        "--gates",
        gates.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
