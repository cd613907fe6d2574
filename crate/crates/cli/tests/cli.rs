use std::fs;
use std::path::Path;
use std::process::Command;

use geotransfer_cli::{builtin_fixtures, run, Scenario, Status};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geotransfer"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"{
  "schema": "1",
  "seed": 7,
  "streams": [
    {"name": "pair", "stream": {"window_lo": 0, "values": [1.0, 2.0]}}
  ],
  "tasks": [
    {"name": "alloc", "kind": "allocate", "profile": "uniform_half", "stream": "pair", "window": [0, 6]},
    {"name": "shares", "kind": "classify", "profiles": ["uniform_half", "example1"]},
    {"name": "geo", "kind": "axioms", "rule": "uniform_quarter", "axioms": ["feasibility", "consistency"],
     "battery": {"size": 20}, "expect": {"feasibility": "pass", "consistency": "pass"}},
    {"name": "recover", "kind": "reconstruct", "rule": "double", "window": [0, 2], "expect_infeasible": true}
  ]
}"#;

#[test]
fn small_scenario_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.json", SMALL);
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&path).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join("alloc.json")).unwrap()).unwrap();
    assert_eq!(doc["schema"], "1");
    assert_eq!(doc["status"], "ok");
    let csv = fs::read_to_string(out.join("alloc.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("generation,income,allocation"));
    assert_eq!(lines.next(), Some("0,1,0.5"));
    // generation 1 keeps half of 2 + 0.5
    assert_eq!(lines.next(), Some("1,2,1.25"));
    assert!(out.join("shares.csv").exists());
    assert!(!out.join("recover.csv").exists());
}

#[test]
fn unmet_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(r#""expect_infeasible": true"#, r#""expect_infeasible": false"#);
    let path = write(dir.path(), "s.json", &text);
    let out = dir.path().join("out");
    let output = bin().arg("run").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join("recover.json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "mismatch");
}

#[test]
fn parse_errors_are_line_anchored() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", "{\n  \"tasks\": [\n    {\"name\": \"x\", \"kind\": \"allocate\", \"profile\": \"nowhere\", \"stream\": \"s\"}\n  ]\n}\n");
    let output = bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.starts_with(&format!("{}:3:", path.display())), "{err}");
    assert!(err.contains("nowhere"));

    let path = write(dir.path(), "syntax.json", "{\n  \"seed\": 1,\n  \"tasks\": [}\n");
    let output = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8(output.stderr).unwrap().contains(":3:"));
}

#[test]
fn empty_task_list_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "empty.json", r#"{"schema": "1", "tasks": []}"#);
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&path).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn seed_flag_overrides_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.json", SMALL);
    let out = dir.path().join("out");
    bin()
        .args(["run", "--seed", "99", "--out"])
        .arg(&out)
        .arg(&path)
        .status()
        .unwrap();
    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join("geo.json")).unwrap()).unwrap();
    assert_eq!(doc["seed"], 99);
    assert_eq!(doc["result"][0]["battery"]["seed"], 99);
}

#[test]
fn outputs_are_reproducible() {
    let scenario = Scenario::parse(SMALL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&scenario, a.path()).unwrap();
    run(&scenario, b.path()).unwrap();
    for name in ["alloc.json", "alloc.csv", "geo.json", "geo.csv", "shares.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn fixture_scenario_round_trips_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fx");
    let output = bin().args(["fixtures", "--dump", "--out"]).arg(&out).output().unwrap();
    let dumped = fs::read_to_string(out.join("scenario.json")).unwrap();
    assert_eq!(Scenario::parse(&dumped).unwrap(), builtin_fixtures());

    // rerunning the dumped file reproduces every output byte for byte
    let again = dir.path().join("again");
    let rerun = bin()
        .arg("run")
        .arg(out.join("scenario.json"))
        .arg("--out")
        .arg(&again)
        .output()
        .unwrap();
    assert_eq!(rerun.status.code(), output.status.code());
    for task in &builtin_fixtures().tasks {
        let name = format!("{}.json", task.name);
        assert_eq!(
            fs::read(out.join(&name)).unwrap(),
            fs::read(again.join(&name)).unwrap(),
            "{name}"
        );
    }

    let reports = run(&builtin_fixtures(), &dir.path().join("lib")).unwrap();
    let expected_code = if reports.iter().all(|r| r.status == Status::Ok) {
        0
    } else {
        1
    };
    assert_eq!(output.status.code(), Some(expected_code));
    for r in &reports {
        if r.kind != "independence" {
            assert_eq!(r.status, Status::Ok, "{}: {}", r.name, r.summary);
        }
    }
}

#[test]
fn shipped_example_scenario_passes() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/basic.json");
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stdout)
    );
    let csv = fs::read_to_string(dir.path().join("venn.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}
