//! End-to-end exercises of the command-line surface: file formats, exit
//! codes and JSON shape.

use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minorarc"))
}

fn write_input(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    file.write_all(content.as_bytes()).expect("write input");
    file
}

fn json_of(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

#[test]
fn verify_json_report_shape() {
    let out = bin()
        .args(["verify-minor-arcs", "--n", "39", "--engine", "branch"])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["schema"], "1");
    assert_eq!(json["tool"], "minorarc");
    assert_eq!(json["command"], "verify-minor-arcs");
    assert_eq!(json["params"]["delta"], "993/7000");
    let result = &json["result"][0];
    assert_eq!(result["margin"], "-37/20000");
    assert_eq!(result["argmax"]["phi"], "3/2");
    assert_eq!(result["argmax"]["tau"], "-9/4");
    assert_eq!(result["min_bound"], "B_AV/P");
    assert_eq!(result["d1"]["engine"], "branch");
    assert!(result["d1"]["cell"]["region"]["constraints"].is_array());
}

#[test]
fn verify_text_mode() {
    let out = bin()
        .args([
            "verify-minor-arcs",
            "--n",
            "39",
            "--engine",
            "branch",
            "--output",
            "text",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("margin = -37/20000"));
}

#[test]
fn decimal_parameters_rejected_with_hint() {
    let out = bin()
        .args(["verify-minor-arcs", "--n", "39", "--eps-prime", "0.0001"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("1/10000"),
        "error should hint at rational syntax: {}",
        err
    );
}

#[test]
fn unknown_flags_rejected() {
    let out = bin()
        .args(["verify-minor-arcs", "--n", "39", "--frobnicate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nullcount_identity_both_methods() {
    let input = write_input(r#"{"matrix": [[1, 0], [0, 1]]}"#);
    let out = bin()
        .args([
            "nullcount",
            "--input",
            input.path().to_str().unwrap(),
            "--q",
            "12",
            "--method",
            "both",
        ])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["result"]["count"], "1");
    assert_eq!(json["result"]["agree"], true);
}

#[test]
fn snf_reports_invariant_factors() {
    let input = write_input(r#"{"matrix": [[2, 1], [1, 2]]}"#);
    let out = bin()
        .args(["snf", "--input", input.path().to_str().unwrap()])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["result"]["invariant_factors"][0], "1");
    assert_eq!(json["result"]["invariant_factors"][1], "3");
}

#[test]
fn expsum_gauss_sum() {
    let input = write_input(
        r#"{"f": {"quadratic": [[1]], "linear": [0], "constant": 0},
            "g": {"quadratic": [[0]], "linear": [0], "constant": 0},
            "a": [1, 0], "q": 5, "m": [0]}"#,
    );
    let out = bin()
        .args([
            "expsum",
            "pointwise",
            "--input",
            input.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let json = json_of(&out);
    let re = json["result"]["re"].as_f64().unwrap();
    let im = json["result"]["im"].as_f64().unwrap();
    assert!((re.hypot(im) - 5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn singular_series_r1() {
    let input = write_input(
        r#"{"f": {"n": 2, "monomials": [{"exps": [3, 0], "coeff": 1}]},
            "g": {"n": 2, "monomials": [{"exps": [0, 3], "coeff": 1}]}}"#,
    );
    let out = bin()
        .args([
            "singular-series",
            "--input",
            input.path().to_str().unwrap(),
            "--r-max",
            "1",
        ])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert!((json["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn singular_integral_constant_phase() {
    let input = write_input(
        r#"{"f": {"n": 1, "monomials": []},
            "g": {"n": 1, "monomials": []},
            "x0": ["0"]}"#,
    );
    let out = bin()
        .args([
            "singular-integral",
            "--input",
            input.path().to_str().unwrap(),
            "--r",
            "1/2",
            "--rho",
            "1/2",
            "--grid",
            "100",
        ])
        .output()
        .unwrap();
    let json = json_of(&out);
    let value = json["result"]["value"]["re"].as_f64().unwrap();
    // (2R)^2 * integral of the scaled bump: positive and below rho * 0.444^n.
    assert!(value > 0.0 && value < 0.25);
}

#[test]
fn poisson_check_small_config() {
    let input = write_input(
        r#"{"f": {"quadratic": [[1]], "linear": [0], "constant": 0},
            "g": {"quadratic": [[0]], "linear": [0], "constant": 0},
            "x0": ["0"], "rho": "3/10"}"#,
    );
    let out = bin()
        .args([
            "poisson-check",
            "--input",
            input.path().to_str().unwrap(),
            "--q",
            "2",
            "--z",
            "0,0",
            "--big-p",
            "10",
            "--m-cut",
            "25",
        ])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert!(json["result"]["abs_diff"].as_f64().unwrap() < 1e-6);
}

#[test]
fn malformed_input_exits_2() {
    let input = write_input(r#"{"matrix": "nonsense"}"#);
    let out = bin()
        .args(["snf", "--input", input.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
