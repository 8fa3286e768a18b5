use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn rotation_report() {
    let o = run(&["analyze", "--scenario", "rotation"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["classification"]["criterion"], "orthogonal");
    assert_eq!(r["shadowing"]["verdict"], true);
    assert!(r["outcome"]["max_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["config"]["window"], 100);
    assert_eq!(r["options"]["seed"], 0xC0FFEE);
}

#[test]
fn no_cones_has_no_shadowing() {
    let o = run(&["analyze", "--scenario", "no_cones"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["shadowing"]["verdict"], false);
}

#[test]
fn misspelled_scenario_lists_builtins() {
    let o = run(&["analyze", "--scenario", "rotaton"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("rotation") && err.contains("delta_basis"),
        "{err}"
    );
}

#[test]
fn refusal_exit_code() {
    let o = run(&["analyze", "--scenario", "jordan_skew"]);
    assert_eq!(code(&o), 3);
    let r = stdout_json(&o);
    assert_eq!(r["classification"]["criterion"], "none");
    assert!(r["shadowing"].is_null());
}

#[test]
fn bad_flags_are_config_errors() {
    assert_eq!(
        code(&run(&["analyze", "--scenario", "rotation", "--p", "0.5"])),
        2
    );
    assert_eq!(
        code(&run(&[
            "analyze",
            "--scenario",
            "rotation",
            "--window",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&run(&["analyze", "--scenario", "rotation", "--tol", "-1"])),
        2
    );
}

#[test]
fn config_file_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diag.json");
    fs::write(
        &cfg,
        r#"{"name": "diagonal", "params": {"lambdas": [[2.0, 0.5], [3.0]]}, "window": 40}"#,
    )
    .unwrap();
    let o = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["config"]["window"], 40);
    // the first coordinate alternates 2 and 1/2
    assert_eq!(r["shadowing"]["verdict"], false);

    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(
        code(&run(&["analyze", "--config", cfg.to_str().unwrap()])),
        2
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&run(&["analyze", "--config", missing.to_str().unwrap()])),
        5
    );
}

fn strip_timing(mut v: Value) -> Value {
    v["wall_clock_ms"] = Value::Null;
    v
}

#[test]
fn reports_are_deterministic() {
    let a = run(&["analyze", "--scenario", "anosov"]);
    let b = run(&["analyze", "--scenario", "anosov"]);
    assert_eq!(code(&a), 0);
    assert_eq!(strip_timing(stdout_json(&a)), strip_timing(stdout_json(&b)));
}

#[test]
fn text_and_csv_formats() {
    let o = run(&[
        "analyze",
        "--scenario",
        "eigen_orthogonal",
        "--format",
        "text",
    ]);
    let t = String::from_utf8_lossy(&o.stdout);
    assert!(t.contains("criterion     orthogonal"), "{t}");
    let o = run(&[
        "analyze",
        "--scenario",
        "eigen_orthogonal",
        "--format",
        "csv",
    ]);
    let c = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = c.lines().collect();
    assert_eq!(
        lines[0],
        "name,criterion,shadowing,max_residual,K,runtime_ms"
    );
    assert!(lines[1].starts_with("eigen_orthogonal,orthogonal,true,"));
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn shadow_zero_and_impulse() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("z.json");
    write(
        &input,
        r#"{"defects": [{"window": [-2, 2], "p": 2, "entries": []}]}"#,
    );
    let o = run(&[
        "shadow",
        "--scenario",
        "rotation",
        "--input",
        input.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout_json(&o);
    assert_eq!(out["correction_sup"], 0.0);

    write(
        &input,
        r#"{"defects": [{"window": [3, 3], "p": 2, "entries": [[3, [0.6, -0.8]]]}]}"#,
    );
    let out_path = dir.path().join("orbit.json");
    let o = run(&[
        "shadow",
        "--scenario",
        "rotation",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let out: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let sup = out["correction_sup"].as_f64().unwrap();
    assert!(sup <= 2.0 * 1.0 + 1e-12, "{sup}");
    assert!(out["defect_residual"].as_f64().unwrap() <= 1e-12);
    // orbit points re-load as sequence points
    let pts: Vec<shiftlab::SeqPoint> = serde_json::from_value(out["correction"].clone()).unwrap();
    assert_eq!(pts.len(), 2);
}

#[test]
fn shadow_pseudo_orbit_gives_true_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.json");
    write(
        &input,
        r#"{"pseudo_orbit": [
            {"window": [0, 1], "p": 2, "entries": [[0, [1.0, 0.0]], [1, [0.0, 1.0]]]},
            {"window": [0, 0], "p": 2, "entries": [[0, [0.1, 0.2]]]},
            {"window": [-1, 0], "p": 2, "entries": [[-1, [0.0, 0.05]], [0, [0.02, 0.0]]]}
        ]}"#,
    );
    let o = run(&[
        "shadow",
        "--scenario",
        "eigen_orthogonal",
        "--input",
        input.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout_json(&o);
    let orbit: Vec<shiftlab::SeqPoint> = serde_json::from_value(out["orbit"].clone()).unwrap();
    let s = shiftlab::scenarios::build_eigen_orthogonal()
        .unwrap()
        .sequence;
    for k in 0..2 {
        let next = shiftlab::seqspace::shift_apply(&s, &orbit[k]).unwrap();
        assert!(shiftlab::seqspace::max_distance(&next, &orbit[k + 1]) < 1e-10);
    }
    assert!(
        out["correction_sup"].as_f64().unwrap()
            <= out["K"].as_f64().unwrap() * out["defect_sup"].as_f64().unwrap()
    );
}

#[test]
fn shadow_refusal_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.json");
    write(
        &input,
        r#"{"defects": [{"window": [0, 0], "p": 2, "entries": [[0, [1.0, 0.0]]]}]}"#,
    );
    let i = input.to_str().unwrap();
    assert_eq!(
        code(&run(&["shadow", "--scenario", "no_cones", "--input", i])),
        3
    );
    assert_eq!(
        code(&run(&["shadow", "--scenario", "jordan_skew", "--input", i])),
        3
    );
    let missing = dir.path().join("none.json");
    assert_eq!(
        code(&run(&[
            "shadow",
            "--scenario",
            "rotation",
            "--input",
            missing.to_str().unwrap()
        ])),
        5
    );
    write(&input, r#"{"defects": []}"#);
    assert_eq!(
        code(&run(&["shadow", "--scenario", "rotation", "--input", i])),
        2
    );
}

#[test]
fn full_suite_aggregates_to_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    let o = run(&["analyze", "--all", "--output", reports.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv_path = dir.path().join("all.csv");
    let o = run(&[
        "report",
        reports.to_str().unwrap(),
        "--output",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let names: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    let mut expected: Vec<String> = shiftlab::scenarios::BUILTIN
        .iter()
        .map(|s| s.to_string())
        .collect();
    expected.sort();
    assert_eq!(names, expected);

    // every report re-loads into the typed form where bounds are finite
    let text = fs::read_to_string(reports.join("rotation.json")).unwrap();
    let r: shiftlab::Report = serde_json::from_str(&text).unwrap();
    assert_eq!(r.scenario.name, "rotation");
}

#[test]
fn empty_and_corrupt_directories() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "name,criterion,shadowing,max_residual,K,runtime_ms\n"
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    let good = run(&["analyze", "--scenario", "rotation"]);
    fs::write(dir.path().join("a.json"), &good.stdout).unwrap();
    fs::write(dir.path().join("b.json"), "{\"truncated\": ").unwrap();
    fs::write(dir.path().join("c.json"), "{\"scenario\": {}}").unwrap();
    let o = run(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("b.json") && err.contains("c.json"), "{err}");

    assert_eq!(
        code(&run(&["report", dir.path().join("nope").to_str().unwrap()])),
        5
    );
}
