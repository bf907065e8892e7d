//! End-to-end runs of the `qwalk` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwalk"))
        .args(args)
        .env("QWALK_THREADS", "2")
        .output()
        .expect("qwalk runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn engineer_balanced_four_sites_gives_two_quarter_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", r#"{"amplitudes": [1, 1, 1, 1]}"#);
    let out = qwalk(&["engineer", "--target", s(&t)]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    let sols = v["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    for sol in sols {
        assert!((sol["probability"].as_f64().unwrap() - 0.25).abs() < 1e-10);
        assert!((sol["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn engineer_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", r#"{"amplitudes": [1, 1, 1, 1, 1, -1]}"#);
    let a = qwalk(&["engineer", "--target", s(&t), "--seed", "5"]);
    let b = qwalk(&["engineer", "--target", s(&t), "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unreachable_degenerate_target_exits_2_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", r#"{"amplitudes": [1, 1, 1]}"#);
    let out = qwalk(&["engineer", "--target", s(&t)]);
    assert_eq!(out.status.code(), Some(2));
    let v = json_stdout(&out);
    assert_eq!(v["code"], 2);
    assert!(v["context"]["diagnostic"].as_str().unwrap().contains("not reachable"));
}

#[test]
fn bad_input_exits_1_with_error_object() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", r#"{"amplitudes": [0, 0]}"#);
    let out = qwalk(&["engineer", "--target", s(&t)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stdout(&out)["code"], 1);

    let out = qwalk(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stdout(&out)["code"], 1);

    let out = qwalk(&["engineer", "--target", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_check_backsolve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let walk = write(
        dir.path(),
        "walk.json",
        r#"{"coins": [
            {"theta": 0.7853981633974483, "xi": 0, "zeta": 0},
            {"theta": 0.4, "xi": 1.1, "zeta": -0.3},
            {"theta": 1.2, "xi": 0.2, "zeta": 2.0}
        ]}"#,
    );
    let out = qwalk(&["simulate", "--walk", s(&walk)]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    let state = write(dir.path(), "state.json", &v["state"].to_string());

    let out = qwalk(&["check", "--state", s(&state), "--steps", "3"]);
    assert!(out.status.success());
    let c = json_stdout(&out);
    assert_eq!(c["reachable"], true);
    assert_eq!(c["max_reachable_steps"], 3);

    let out = qwalk(&["check", "--state", s(&state), "--steps", "4"]);
    assert_eq!(out.status.code(), Some(1));

    let bent = write(
        dir.path(),
        "bent.json",
        r#"{"origin": 1, "amplitudes": [[[0.6, 0], [0, 0]], [[0.6, 0], [0.2, 0]], [[0, 0], [0.5, 0]]]}"#,
    );
    let out = qwalk(&["check", "--state", s(&bent), "--steps", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_stdout(&out)["code"], 2);

    let coins = dir.path().join("coins.json");
    let out = qwalk(&["backsolve", "--state", s(&state), "--out", s(&coins)]);
    assert!(out.status.success());
    let alphas = write(dir.path(), "alphas.json", "[0.4, -1.3]");
    let phased = dir.path().join("phased.json");
    let out = qwalk(&["backsolve", "--state", s(&state), "--alphas", s(&alphas), "--out", s(&phased)]);
    assert!(out.status.success());
    assert_ne!(std::fs::read(&coins).unwrap(), std::fs::read(&phased).unwrap());
    let out = qwalk(&["backsolve", "--state", s(&state), "--random-alphas", "--seed", "4"]);
    assert!(out.status.success());

    let out = qwalk(&["simulate", "--walk", s(&phased)]);
    let w = json_stdout(&out);
    assert_eq!(w["state"]["origin"], v["state"]["origin"]);
    let a = v["state"]["amplitudes"].as_array().unwrap();
    let b = w["state"]["amplitudes"].as_array().unwrap();
    for (x, y) in a.iter().zip(b) {
        for k in 0..2 {
            for c in 0..2 {
                let d = x[k][c].as_f64().unwrap() - y[k][c].as_f64().unwrap();
                assert!(d.abs() < 1e-9);
            }
        }
    }
}

#[test]
fn project_uses_given_bra() {
    let dir = tempfile::tempdir().unwrap();
    let state = write(
        dir.path(),
        "s.json",
        r#"{"origin": 1, "amplitudes": [[[0.6, 0], [0, 0]], [[0, 0], [0.8, 0]]]}"#,
    );
    let out = qwalk(&["project", "--state", s(&state), "--bra", "1,0,0,0"]);
    assert!(out.status.success());
    assert!((json_stdout(&out)["probability"].as_f64().unwrap() - 0.36).abs() < 1e-12);
}

#[test]
fn sweep_and_compile_produce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let out = qwalk(&["reproduce", "--case", "balanced4", "--out", s(&sol)]);
    assert!(out.status.success());

    let out = qwalk(&["sweep", "--solution", s(&sol), "--param", "2:xi", "--grid", "-0.2,0.2,5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,angle,eps,fidelity,probability");
    assert_eq!(lines.len(), 6);
    assert!(lines[3].starts_with("2,xi,0.0,1.0,"));

    let out = qwalk(&["compile", "--solution", s(&sol), "--index", "1"]);
    assert!(out.status.success());
    let plan = json_stdout(&out);
    assert_eq!(plan["units"].as_array().unwrap().len(), 3);

    let out = qwalk(&["compile", "--solution", s(&sol), "--index", "7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn histogram_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let bins = dir.path().join("b.csv");
    let out = qwalk(&[
        "histogram",
        "--steps",
        "2",
        "--samples",
        "50",
        "--mode",
        "d-system",
        "--seed",
        "3",
        "--out",
        s(&csv),
        "--bins-out",
        s(&bins),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(std::fs::read_to_string(&bins).unwrap().lines().count() > 1);
}

#[test]
fn optimize_reaches_a_reachable_target() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", r#"{"amplitudes": [1, 1, 1]}"#);
    let out = qwalk(&["optimize", "--target", s(&t), "--steps", "4", "--restarts", "4", "--seed", "1"]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert!(v["solutions"][0]["fidelity"].as_f64().unwrap() > 0.999);
    assert!(v["optimizer"]["iterations"].as_u64().unwrap() > 0);
}
