use std::path::PathBuf;

use ncpsatz::cli::{report_schema_validate, run_with, EXIT_USAGE};
use ncpsatz::freealg::MatTuple;
use ncpsatz::moment::{functional_from_witness, WitnessJson};
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ncpsatz-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Exit code, stdout and stderr of one invocation.
fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("ncpsatz")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn report(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = run(args);
    let value: Value = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out}{err}"));
    report_schema_validate(&value).unwrap_or_else(|e| panic!("{e}: {out}"));
    assert_eq!(value["exit_code"].as_i64(), Some(i64::from(code)));
    (code, value)
}

#[test]
fn two_minus_square_is_certified() {
    let (code, r) = report(&["certify", "-p", "2 - x1*x1", "-q", "1 - x1*x1"]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "certificate");
    let residual = r["residuals"]["certificate"].as_f64().unwrap();
    assert!(residual <= r["residuals"]["tolerance"].as_f64().unwrap());
}

#[test]
fn linear_target_on_the_ball_is_refuted() {
    let ball = data("ball.json");
    let (code, r) = report(&["certify", "-p", "x1", "-L", &ball]);
    assert_eq!(code, 1);
    assert!(r["witness"]["value"].as_f64().unwrap() <= -0.9);
    assert!(r["residuals"]["domain_min_eig"].as_f64().unwrap() >= -1e-8);
}

#[test]
fn halfline_is_unbounded() {
    let (code, r) = report(&["bounded", "-L", &data("halfline.json")]);
    assert_eq!(code, 1);
    assert_eq!(r["status"], "unbounded");
    let (code, r) = report(&["bounded", "-L", &data("ball.json")]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "bounded");
}

#[test]
fn every_command_emits_a_valid_report() {
    let ball = data("ball.json");
    let half = data("halfline.json");
    let x = MatTuple::from_point(&[0.5]);
    let lambda = functional_from_witness(&x, &nalgebra::DVector::from_element(1, 1.0), 1, 4).unwrap();
    let moments = scratch("moments.json");
    std::fs::write(&moments, serde_json::to_string(&lambda.to_json()).unwrap()).unwrap();
    let tuple = scratch("tuple.json");
    std::fs::write(&tuple, r#"{"X": [[[0.5]]]}"#).unwrap();
    let sdpa = scratch("problem.dat-s");
    let moments = moments.to_string_lossy().into_owned();
    let tuple = tuple.to_string_lossy().into_owned();
    let sdpa = sdpa.to_string_lossy().into_owned();
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["certify", "-p", "2 - x1*x1", "-L", &ball], 0),
        (vec!["refute", "-p", "x1", "-L", &ball], 1),
        (vec!["refute", "-p", "2 - x1*x1", "-L", &ball], 0),
        (vec!["dominate", "-L", &ball, "--lp", &half], 0),
        (vec!["dominate", "-L", &half, "--lp", &ball], 1),
        (vec!["normalize", "-q", "1 - x1*x1"], 0),
        (vec!["normalize", "-q", "1 + x1*x1"], 1),
        (vec!["unitcert", "-L", &ball], 0),
        (vec!["unitcert", "-L", &half], 1),
        (vec!["gns", "--moments", &moments, "--degree", "0"], 0),
        (vec!["eval", "-p", "1 - x1", "--tuple", &tuple], 0),
        (vec!["eval", "-p", "x1", "-L", &ball, "--trials", "40"], 1),
        (vec!["eval", "-p", "2 - x1*x1", "-L", &ball, "--trials", "40"], 0),
        (
            vec!["export-sdpa", "-p", "2 - x1*x1", "-L", &ball, "--sdpa-out", &sdpa],
            0,
        ),
    ];
    for (args, expected) in cases {
        let (code, r) = report(&args);
        assert_eq!(code, expected, "{args:?}: {r}");
    }
    assert!(std::fs::read_to_string(&sdpa).unwrap().lines().count() > 4);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let ball = data("ball.json");
    for args in [
        vec!["certify", "-p", "x1", "-L", ball.as_str()],
        vec!["certify", "-p", "2 - x1*x1", "-q", "1 - x1*x1"],
        vec!["eval", "-p", "x1", "-L", ball.as_str(), "--trials", "30", "--seed", "9"],
    ] {
        let first = run(&args);
        let second = run(&args);
        assert_eq!(first, second, "{args:?}");
    }
}

#[test]
fn witness_reports_round_trip() {
    let (_, r) = report(&["refute", "-p", "x1", "-L", &data("ball.json")]);
    let parsed: WitnessJson = serde_json::from_value(r["witness"].clone()).unwrap();
    let witness = parsed.to_witness().unwrap();
    let again = serde_json::to_value(witness.to_json()).unwrap();
    let reparsed: WitnessJson = serde_json::from_value(again).unwrap();
    assert_eq!(parsed, reparsed);
}

#[test]
fn reports_without_residuals_are_rejected() {
    let (_, mut r) = report(&["bounded", "-L", &data("ball.json")]);
    r.as_object_mut().unwrap().remove("residuals");
    let err = report_schema_validate(&r).unwrap_err();
    assert_eq!(err.paths, vec!["$.residuals".to_string()]);
}

#[test]
fn usage_errors_exit_64() {
    let (code, out, err) = run(&["certify", "-p", "1 + * x1", "-q", "1 - x1*x1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("line 1"), "{err}");
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["certify", "-p", "x1"]).0, EXIT_USAGE);
    assert_eq!(
        run(&["certify", "-p", "x1", "-L", "1 - x1", "--tol", "-1"]).0,
        EXIT_USAGE
    );
}
