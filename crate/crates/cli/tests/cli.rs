use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_branched"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn branched")
}

fn run_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .collect()
}

fn manifest(report: &Value) -> BTreeSet<String> {
    report["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let cfg = fixture("deform.json");
    for dir in [&a, &b] {
        run_ok(&[
            "deform",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--format",
            "csv,json,svg",
        ]);
    }
    let names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(names.len() >= 7);
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn manifest_matches_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("susy");
    let cfg = fixture("classical_susy.json");
    let report = run_ok(&[
        "classical",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(manifest(&report), listing(&out));
    for f in report["files"].as_array().unwrap() {
        let len = fs::metadata(f["path"].as_str().unwrap()).unwrap().len();
        assert_eq!(len, f["bytes"].as_u64().unwrap());
    }
    assert_eq!(report["command"], "classical");
    assert!(report["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn susy_portrait_has_six_contour_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("susy");
    let cfg = fixture("classical_susy.json");
    let report = run_ok(&[
        "classical",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv,svg",
    ]);
    let contours: Vec<_> = manifest(&report)
        .into_iter()
        .filter(|p| p.contains("classical_contours_"))
        .collect();
    assert_eq!(contours.len(), 6);
    let svg = fs::read_to_string(out.join("classical_portrait.svg")).unwrap();
    for color in ["teal", "blue", "purple", "black", "sienna", "red"] {
        assert!(svg.contains(&format!("stroke=\"{color}\"")), "{color}");
    }
    // E = 0: only the H- branch has a contour
    let e0 = fs::read_to_string(out.join("classical_contours_1.csv")).unwrap();
    let mut rows = e0.lines().skip(1);
    assert!(rows.all(|r| r.split(',').nth(1) == Some("h_minus")));
}

#[test]
fn gaussian_separatrix_is_black_oval_and_cusped_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let cfg = fixture("classical_gaussian.json");
    let report = run_ok(&[
        "classical",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv,json,svg",
    ]);
    let svg = fs::read_to_string(out.join("classical_portrait.svg")).unwrap();
    assert!(svg.matches("stroke=\"black\"").count() >= 4);
    let sep = &report["tasks"][0]["diagnostics"];
    assert_eq!(sep["branches"]["middle"]["closed"], 1);
    assert_eq!(sep["orbit_class"]["middle"], "separatrix_candidate");
    let traj = report["tasks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["task"] == "trajectory 0")
        .unwrap();
    assert!(traj["diagnostics"]["switch_events"].as_u64().unwrap() > 0);
    assert!(
        traj["diagnostics"]["relative_energy_drift"]
            .as_f64()
            .unwrap()
            < 1e-7
    );
}

#[test]
fn quantum_report_contains_first_level() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("q");
    let cfg = fixture("quantum_first_level.json");
    let report = run_ok(&[
        "quantum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let levels: Value =
        serde_json::from_slice(&fs::read(out.join("quantum_spectrum.json")).unwrap()).unwrap();
    let e = levels[0]["energy"].as_f64().unwrap();
    assert!((e - 1.89379).abs() < 1e-3, "{e}");
    assert_eq!(manifest(&report).len(), 1);
}

#[test]
fn gaussian_branches_close_at_three_cusps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let cfg = fixture("branches_gaussian.json");
    let report = run_ok(&[
        "branches",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let pb = (-0.5f64).exp();
    let cusps = report["tasks"][0]["diagnostics"]["cusps"]
        .as_array()
        .unwrap();
    let ps: Vec<f64> = cusps.iter().map(|c| c["p"].as_f64().unwrap()).collect();
    assert!((ps[0] + pb).abs() < 1e-12 && ps[1] == 0.0 && (ps[2] - pb).abs() < 1e-12);

    let csv = fs::read_to_string(out.join("branches_hamiltonian.csv")).unwrap();
    let rows: Vec<(String, f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (
                c[0].to_string(),
                c[1].parse().unwrap(),
                c[3].parse().unwrap(),
            )
        })
        .collect();
    let end = |b: &str, first: bool| {
        let mut it = rows.iter().filter(|r| r.0 == b);
        let r = if first { it.next() } else { it.next_back() };
        let r = r.unwrap();
        (r.1, r.2)
    };
    // minus ends where middle starts, plus ends where middle ends, minus meets plus at p = 0
    let close =
        |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-9;
    assert!(close(end("minus", true), end("middle", true)));
    assert!(close(end("plus", false), end("middle", false)));
    assert!(close(end("minus", false), end("plus", true)));
}

#[test]
fn invalid_config_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let o = out.to_str().unwrap();
    let cases = [
        r#"{"deform": {"kappas": [1.0], "bogus": 1}}"#,
        r#"{"deform": {"kappas": [-1.0]}}"#,
        r#"{"command": "quantum"}"#,
        r#"{"model": {"kind": "gaussian", "mass": -1.0, "scale": 1.0, "potential": {"kind": "zero"}}}"#,
        r#"{"output": {"directory": "x", "formats": []}}"#,
        "not json",
    ];
    for text in cases {
        let cfg = write_config(tmp.path(), text);
        let r = run(&["deform", "--config", cfg.to_str().unwrap(), "--out", o]);
        assert_eq!(r.status.code(), Some(2), "{text}");
        assert!(r.stdout.is_empty());
        assert!(!out.exists(), "{text}");
    }
    let r = run(&["deform", "--config", "/nonexistent/config.json", "--out", o]);
    assert_eq!(r.status.code(), Some(2));
    let r = run(&["quantum", "--tol", "2", "--out", o]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn field_path_in_validation_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"classical": {"energies": [1.0, 2.0], "colors": ["red", "no color!"]}}"#,
    );
    let r = run(&["classical", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("classical.colors[1]"), "{err}");
}

#[test]
fn computation_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("q");
    let cfg = write_config(
        tmp.path(),
        r#"{"quantum": {"profile": {"kind": "susy_minus"}, "bc": {"kind": "dirichlet"}, "bracket": [0.1, 0.2]}}"#,
    );
    let r = run(&[
        "quantum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("quantum"), "{err}");
    assert!(!out.exists());
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("flags");
    let cfg = fixture("branches_susy.json");
    let report = run_ok(&[
        "branches",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "svg",
        "--tol",
        "1e-9",
    ]);
    assert_eq!(report["config"]["tol"], 1e-9);
    assert_eq!(
        report["config"]["output"]["formats"],
        serde_json::json!(["svg"])
    );
    assert!(manifest(&report).iter().all(|p| p.ends_with(".svg")));
    assert_eq!(manifest(&report), listing(&out));
}
