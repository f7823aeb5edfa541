use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_beaconplan"));
    c.env("NO_COLOR", "1").env("RUST_LOG", "warn");
    c
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let plan = dir.join("plan.png");
    let out = bin()
        .args(["synth", "--width", "900", "--height", "1100", "--doors", "10", "--stairs", "1", "--seed", "3", "--out"])
        .arg(&plan)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    plan
}

fn run(plan: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(plan)
        .args(["--dpi", "200", "--scale", "1/16=1ft", "--out"])
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let plan = synth(dir.path());
    let out = dir.path().join("out");
    let res = run(&plan, &out, &["--option", "1", "--mode", "path-only"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["graph.json", "overlay.png", "timing.json", "project/manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let graph: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("graph.json")).unwrap()).unwrap();
    assert!(!graph["nodes"].as_array().unwrap().is_empty());
    assert_eq!(graph["meta"]["units"], "feet");
    let timing: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("timing.json")).unwrap()).unwrap();
    assert!(timing["phases_ms"]["detection_ms"].as_f64().unwrap() > 0.0);

    let exported = bin().arg("export").arg(out.join("project")).output().unwrap();
    assert!(exported.status.success());
    assert_eq!(exported.stdout, std::fs::read(out.join("graph.json")).unwrap());
    let csv = bin().arg("export").arg(out.join("project")).args(["--format", "csv"]).output().unwrap();
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("a,b,length_ft,code,zone_level\n"));
}

#[test]
fn same_inputs_give_identical_exports() {
    let dir = tempfile::tempdir().unwrap();
    let plan = synth(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&plan, &a, &["--seed", "5"]).status.success());
    assert!(run(&plan, &b, &["--seed", "5"]).status.success());
    assert_eq!(std::fs::read(a.join("graph.json")).unwrap(), std::fs::read(b.join("graph.json")).unwrap());
}

#[test]
fn bundled_model_runs_option_three() {
    let dir = tempfile::tempdir().unwrap();
    let plan = synth(dir.path());
    let out = dir.path().join("o3");
    let res = run(&plan, &out, &["--option", "3", "--model", "bundled", "--format", "graphml"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(std::fs::read_to_string(out.join("graph.graphml")).unwrap().contains("<graphml"));
}

#[test]
fn missing_scale_is_a_usage_error() {
    let res = bin().args(["run", "plan.png", "--dpi", "200"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--scale"));
}

#[test]
fn option_three_without_model_exits_two() {
    let res = bin().args(["run", "plan.png", "--scale", "1/16=1ft", "--option", "3"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let err = error_json(&res);
    assert_eq!(err["error"]["kind"], "model_required");
    assert!(err["error"]["message"].as_str().unwrap().contains("model required"));
}

#[test]
fn bad_scale_and_missing_input_are_machine_readable() {
    let res = bin().args(["run", "plan.png", "--scale", "0"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(error_json(&res)["error"]["kind"], "invalid_scale");

    let dir = tempfile::tempdir().unwrap();
    let res = run(&dir.path().join("nope.png"), &dir.path().join("o"), &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(error_json(&res)["error"]["kind"].is_string());
    assert!(!String::from_utf8_lossy(&res.stderr).contains('\u{1b}'));
}
