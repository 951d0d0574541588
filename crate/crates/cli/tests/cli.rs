use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parajet")).args(args).output().expect("binary runs")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn cone_invariants() {
    let o = run(&["invariants", "--surface", &data("cone.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["invariants"]["branch"], "Cone-branch");
    assert_eq!(v["invariants"]["w"], "0.0000000000000000e0");
    assert_eq!(v["point_type"], "parabolic");
}

#[test]
fn elliptic_point_reports_pick() {
    let o = run(&["invariants", "--surface", &data("elliptic.json"), "--point", "0.1,0"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["point_type"], "elliptic");
    assert!(v["pick"].is_string());
}

#[test]
fn already_normal_surface_has_identity_transform() {
    let o = run(&["normalize", "--surface", &data("id.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["mode"], "exact");
    assert_eq!(v["transform"]["linear"], serde_json::json!([["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]));
    assert_eq!(v["transform"]["translation"], serde_json::json!(["0", "0", "0"]));
}

#[test]
fn curve_normal_form() {
    let o = run(&["normalize", "--curve", &data("curve.json"), "--group", "gl2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["branch"], "Plus");
    assert_eq!(v["readings"]["G5"], "0.0000000000000000e0");
}

#[test]
fn classify_cone_family() {
    let o = run(&["classify", "--family", "cone", "--directrix", r#"[0,0,"1/2","-1/3"]"#, "--order", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["classification"]["kind"], "Cone");
    assert_eq!(v["agrees"], true);
}

#[test]
fn classify_family_file_and_surface() {
    let o = run(&["classify", "--family-json", &data("tangential.json"), "--order", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["classification"]["kind"], "Tangential");
    assert_eq!(v["torsion_at_0"], "1");
    let o = run(&["classify", "--surface", &data("cone.json")]);
    assert_eq!(json(&o)["classification"]["kind"], "Cone");
}

#[test]
fn verify_recurrence_generic() {
    let args = ["verify", "--suite", "recurrence", "--branch", "generic", "--samples", "100", "--seed", "7"];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["samples"], 100);
    // same seed, same bytes
    assert_eq!(run(&args).stdout, o.stdout);
}

#[test]
fn verification_failure_exits_one_and_names_the_identity() {
    let o = run(&["verify", "--suite", "oracle", "--samples", "3", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL G50 = M") || err.contains("FAIL G31 = W"), "{err}");
    assert!(err.contains("u20="), "{err}");
}

#[test]
fn input_errors_exit_two() {
    let o = run(&["invariants", "--surface", &data("broken.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2 column"));
    assert_eq!(run(&["invariants", "--surface", &data("missing.json")]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--family", "cone"]).status.code(), Some(2));
}

#[test]
fn text_format() {
    let o = run(&["--format", "text", "invariants", "--surface", &data("cone.json")]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l == "invariants.branch: Cone-branch"), "{out}");
}
