//! Black-box tests of the command-line binary: exit codes, report
//! determinism, and the scenario listing.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mixcurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixcurv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Small but non-trivial invocation used by several tests.
const QUICK: &[&str] = &[
    "verify",
    "--scenario",
    "product_T2",
    "--scenario",
    "euclidean_foliation",
    "--grid",
    "7",
    "--points",
    "10",
];

fn read_report(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("report file exists");
    serde_json::from_str(&text).expect("report parses")
}

/// Replaces the wall-clock fields, the only part of the report allowed
/// to differ between identical invocations.
fn zero_runtimes(report: &mut Value) {
    for scenario in report["scenarios"].as_array_mut().expect("scenario array") {
        scenario["runtime_ms"] = Value::from(0);
    }
}

#[test]
fn identical_invocations_write_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let first_path = dir.path().join("first.json");
    let second_path = dir.path().join("second.json");

    let mut args = QUICK.to_vec();
    args.extend(["--json", first_path.to_str().unwrap()]);
    assert_eq!(mixcurv(&args).status.code(), Some(0));

    let mut args = QUICK.to_vec();
    args.extend(["--json", second_path.to_str().unwrap()]);
    assert_eq!(mixcurv(&args).status.code(), Some(0));

    let mut first = read_report(&first_path);
    let mut second = read_report(&second_path);
    zero_runtimes(&mut first);
    zero_runtimes(&mut second);
    assert_eq!(first, second);
    assert_eq!(first["schema_version"], 1);
    assert_eq!(first["config"]["grid_n"], 7);
    assert_eq!(first["config"]["points"], 10);
}

#[test]
fn passing_run_exits_zero_and_prints_the_verdict() {
    let output = mixcurv(QUICK);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("OVERALL: PASS"));
}

#[test]
fn forcing_the_wrong_sign_exits_one() {
    let output = mixcurv(&[
        "verify",
        "--scenario",
        "double_twisted_T2",
        "--grid",
        "7",
        "--points",
        "10",
        "--xi-h-sign",
        "plus",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout(&output).contains("OVERALL: FAIL"));
}

#[test]
fn unknown_scenario_name_exits_two() {
    let output = mixcurv(&["verify", "--scenario", "no_such_scenario", "--grid", "5"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("no_such_scenario"));
}

#[test]
fn unknown_subcommand_exits_two() {
    let output = mixcurv(&["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn selecting_scenarios_and_all_together_exits_two() {
    let output = mixcurv(&["verify", "--all", "--scenario", "product_T2"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn zero_grid_exits_two() {
    let output = mixcurv(&["verify", "--scenario", "product_T2", "--grid", "0"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn scenario_listing_json_covers_the_catalog() {
    let output = mixcurv(&["scenarios", "--json"]);
    assert_eq!(output.status.code(), Some(0));
    let listing: Value = serde_json::from_str(&stdout(&output)).expect("listing parses");
    let entries = listing.as_array().expect("array");
    assert_eq!(entries.len(), 8);
    let names: Vec<&str> = entries
        .iter()
        .map(|e| e["name"].as_str().expect("name"))
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(names.contains(&"contact_T3"));
    for entry in entries {
        assert!(!entry["description"]
            .as_str()
            .expect("description")
            .is_empty());
    }
}

#[test]
fn scenario_listing_text_names_every_scenario() {
    let output = mixcurv(&["scenarios"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    for name in [
        "contact_T3",
        "double_twisted_T2",
        "euclidean_foliation",
        "gnomonic_projective_pair",
        "hyperbolic_conformal_pair",
        "product_T2",
        "sphere_latitude_submersion",
        "warped_torus",
    ] {
        assert!(text.contains(name), "listing is missing {name}");
    }
}
