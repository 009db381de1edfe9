use std::path::{Path, PathBuf};
use std::process::Command;

use dyelim::cli::{exit_code, run};
use dyelim::engine::certificate_digest;
use dyelim::Error;
use serde_json::Value;

const LACUNARY8: &str = r#"{"family":"lacunary","d":1,"p":"inf","params":{"base":"2"},"count":8}"#;
const LACUNARY8_BASE3: &str = r#"{"family":"lacunary","d":1,"p":"inf","params":{"base":"3"},"count":8}"#;

fn dyelim(args: &[&str]) -> (i32, Value, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["dyelim"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    let doc = serde_json::from_str(text.trim()).unwrap_or(Value::Null);
    (code, doc, String::from_utf8(err).unwrap())
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn approx(v: &Value) -> f64 {
    v["approx"].as_f64().unwrap()
}

fn construct_small(dir: &Path) -> PathBuf {
    let cert = dir.join("cert.json");
    let (code, _, err) = dyelim(&[
        "construct",
        "--sequence",
        LACUNARY8,
        "--schedule",
        "theorem1",
        "--n-max",
        "8",
        "-o",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    cert
}

fn verify(cert: &Path, seq: &str) -> (i32, Value) {
    let (code, doc, _) = dyelim(&["verify", cert.to_str().unwrap(), "--sequence", seq]);
    (code, doc)
}

fn load(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn save(p: &Path, v: &Value) {
    std::fs::write(p, serde_json::to_string(v).unwrap()).unwrap();
}

#[test]
fn bound_theorem1_delta() {
    let (code, doc, _) = dyelim(&["bound", "--theorem", "1"]);
    assert_eq!(code, 0);
    // 1/(8e log2 30)
    let expected = 1.0 / (8.0 * std::f64::consts::E * 30f64.log2());
    assert!((approx(&doc["delta"]) - expected).abs() < 1e-15);
    assert!(doc["chain"].as_array().unwrap().iter().all(|c| c["verified"] == true));
}

#[test]
fn bound_theorem2_delta() {
    let (code, doc, _) = dyelim(&["bound", "--theorem", "2"]);
    assert_eq!(code, 0);
    let expected = 1.0 / (32.0 * 36f64.log2());
    assert!((approx(&doc["delta"]) - expected).abs() < 1e-15);
}

#[test]
fn bound_rejects_bad_arguments() {
    assert_eq!(dyelim(&["bound", "--theorem", "1", "--N", "0"]).0, 64);
    assert_eq!(dyelim(&["bound", "--theorem", "4"]).0, 64);
    assert_eq!(dyelim(&["bound"]).0, 64);
    assert_eq!(dyelim(&["--threads", "0", "bound", "--theorem", "1"]).0, 64);
    assert_eq!(dyelim(&["--precision", "8", "bound", "--theorem", "1"]).0, 64);
    assert_eq!(dyelim(&["frobnicate"]).0, 64);
}

#[test]
fn help_exits_zero() {
    assert_eq!(dyelim(&["--help"]).0, 0);
}

#[test]
fn error_kinds_map_to_exit_codes() {
    assert_eq!(exit_code(&Error::PrecisionExhausted("x".into())), 2);
    assert_eq!(exit_code(&Error::BudgetExceeded("x".into())), 4);
    assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 64);
}

#[test]
fn measure_one_dimensional_exact() {
    let (code, doc, _) = dyelim(&["measure", "--a", "1", "--eps", "1/8"]);
    assert_eq!(code, 0);
    assert_eq!(doc["measure"], "1/4");
    assert_eq!(doc["method"], "exact");

    let (code, doc, _) = dyelim(&["measure", "--a", "3", "--b", "1/2", "--eps", "1/10", "--v", "1/4", "--r", "1/2"]);
    assert_eq!(code, 0);
    // 3θ + 1/2 sweeps [5/4, 11/4]; only the strip around 2 is hit, width (1/5)/3
    assert_eq!(doc["measure"], "1/15");
    assert_eq!(doc["pass"], true);
}

#[test]
fn measure_two_dimensional_sampled() {
    let (code, doc, _) = dyelim(&["measure", "--a", "1,1", "--eps", "1/8", "--samples", "20000", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(doc["pass"], true);
}

#[test]
fn construct_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cert = construct_small(dir.path());
    let (code, doc) = verify(&cert, LACUNARY8);
    assert_eq!(code, 0, "{doc}");
    assert_eq!(certificate_digest(&load(&cert)), load(&cert)["certificate_digest"]);
}

#[test]
fn verify_against_other_sequence_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cert = construct_small(dir.path());
    assert_eq!(verify(&cert, LACUNARY8_BASE3).0, 5);
}

#[test]
fn corrupted_margin_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cert = construct_small(dir.path());
    let mut v = load(&cert);
    v["leaf"]["margins"][3]["margin"] = Value::String("1/3".into());
    save(&cert, &v);
    let (code, doc) = verify(&cert, LACUNARY8);
    assert_eq!(code, 5);
    assert!(doc.to_string().contains("margin at n = 4"), "{doc}");
}

#[test]
fn resealed_theta_inside_final_box_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cert = construct_small(dir.path());
    let mut v = load(&cert);
    let lo = v["leaf"]["final_box"]["lo"][0].as_str().unwrap().to_string();
    let hi = v["leaf"]["final_box"]["hi"][0].as_str().unwrap().to_string();
    let (ln, ld) = lo.split_once('/').unwrap();
    let (hn, hd) = hi.split_once('/').unwrap();
    let (ln, ld, hn, hd): (u128, u128, u128, u128) =
        (ln.parse().unwrap(), ld.parse().unwrap(), hn.parse().unwrap(), hd.parse().unwrap());
    // a quarter of the way into the box
    let den = 4 * ld * hd;
    let num = 3 * ln * hd + hn * ld;
    v["leaf"]["theta"][0] = Value::String(format!("{num}/{den}"));

    save(&cert, &v);
    assert_eq!(verify(&cert, LACUNARY8).0, 5);

    v["certificate_digest"] = Value::String(certificate_digest(&v));
    save(&cert, &v);
    let (code, doc) = verify(&cert, LACUNARY8);
    assert_eq!(code, 0, "{doc}");
}

#[test]
fn theta_outside_final_box_fails_even_resealed() {
    let dir = tempfile::tempdir().unwrap();
    let cert = construct_small(dir.path());
    let mut v = load(&cert);
    v["leaf"]["theta"][0] = Value::String("1/3".into());
    v["certificate_digest"] = Value::String(certificate_digest(&v));
    save(&cert, &v);
    assert_eq!(verify(&cert, LACUNARY8).0, 5);
}

#[test]
fn infeasible_schedule_is_a_condition_failure() {
    let cfg = configs().join("infeasible.json");
    let (code, doc, _) = dyelim(&["construct", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert_eq!(doc["status"], "error");
    assert!(doc["violation"].is_object());
}

#[test]
fn tiny_budget_exits_four() {
    let (code, _, _) = dyelim(&[
        "construct",
        "--sequence",
        LACUNARY8,
        "--schedule",
        "theorem1",
        "--n-max",
        "8",
        "--cube-budget",
        "4",
    ]);
    assert_eq!(code, 4);
}

#[test]
fn within_targets_the_given_cube() {
    let (code, doc, err) = dyelim(&[
        "construct",
        "--sequence",
        LACUNARY8,
        "--schedule",
        "theorem1",
        "--n-max",
        "8",
        "--within",
        "v=0.25",
        "r=0.25",
    ]);
    assert_eq!(code, 0, "{err}");
    let theta = doc["certificate"]["leaf"]["theta"][0].as_str().unwrap();
    let (num, den) = theta.split_once('/').unwrap();
    let exp: u32 = den.strip_prefix("2^").unwrap().parse().unwrap();
    let t = num.parse::<f64>().unwrap() / 2f64.powi(exp as i32);
    assert!((0.25..=0.5).contains(&t), "{theta}");
}

#[test]
fn analyze_reports_conditions() {
    let cfg = configs().join("linear_cor2.json");
    let (code, doc, err) = dyelim(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(doc.is_object());
}

#[test]
fn binary_reads_precision_from_environment() {
    let bin = env!("CARGO_BIN_EXE_dyelim");
    let low = Command::new(bin)
        .args(["bound", "--theorem", "1"])
        .env("DYELIM_PRECISION", "8")
        .output()
        .unwrap();
    assert_eq!(low.status.code(), Some(64));
    let ok = Command::new(bin)
        .args(["bound", "--theorem", "1"])
        .env("DYELIM_PRECISION", "128")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
