use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn qkr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QKR_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = qkr(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn column(csv_text: &str, idx: usize) -> Vec<f64> {
    csv_text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn evolve_kicks0_matches_golden() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["evolve", "--kicks", "0", "--out", out], tmp.path());
    ok(&["evolve", "--kicks", "0", "--format", "json", "--out", out], tmp.path());
    for f in ["position.csv", "momentum.csv", "position.json", "momentum.json"] {
        assert_eq!(
            read(tmp.path().join(f)),
            read(golden_dir().join("evolve_kicks0").join(f)),
            "{f}"
        );
    }
    let density = column(&read(tmp.path().join("position.csv")), 1);
    assert!(density.iter().all(|&d| d == 1.0 / (2.0 * PI)));
}

#[test]
fn fixture_scaling_matches_golden() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let golden = golden_dir();
    let stdout = ok(
        &["scaling", "--mode", "position", "--fixture", "power_law_fixture.csv", "--format", "json", "--out", out],
        &golden,
    );
    assert_eq!(
        read(tmp.path().join("scaling.json")),
        read(golden.join("fixture_scaling/scaling.json"))
    );
    ok(
        &["scaling", "--mode", "fidelity", "--fixture", "power_law_fixture.csv", "--out", out],
        &golden,
    );
    assert_eq!(
        read(tmp.path().join("scaling.csv")),
        read(golden.join("fixture_scaling/scaling.csv"))
    );

    let doc: serde_json::Value = serde_json::from_str(&read(tmp.path().join("scaling.json"))).unwrap();
    let gamma = doc["fit"]["gamma"].as_f64().unwrap();
    assert!((gamma + 2.5).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&stdout.stdout).contains("gamma"));
}

#[test]
fn json_schema_keys() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["scan", "--kicks", "5", "--mode", "fidelity", "--points", "33", "--format", "json", "--out", out], tmp.path());
    let doc: serde_json::Value = serde_json::from_str(&read(tmp.path().join("scan.json"))).unwrap();
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["data", "manifest"]);
    assert!(doc["data"]["fwhm"].as_f64().unwrap() > 0.0);
    assert!(doc["manifest"].get("wall_time_s").is_none());
    let standalone: serde_json::Value = serde_json::from_str(&read(tmp.path().join("manifest.json"))).unwrap();
    assert!(standalone["wall_time_s"].as_f64().is_some());
    assert_eq!(standalone["config"], doc["manifest"]["config"]);
}

#[test]
fn outputs_identical_across_thread_counts() {
    let runs: Vec<TempDir> = ["1", "4"]
        .iter()
        .map(|t| {
            let tmp = TempDir::new().unwrap();
            let out = tmp.path().to_str().unwrap();
            for fmt in ["csv", "json"] {
                ok(
                    &["--threads", t, "scaling", "--n-from", "5", "--n-to", "8", "--points", "33", "--format", fmt, "--out", out],
                    tmp.path(),
                );
                ok(
                    &["--threads", t, "scan", "--kicks", "6", "--mode", "position", "--format", fmt, "--out", out],
                    tmp.path(),
                );
            }
            tmp
        })
        .collect();
    for f in ["scaling.csv", "scaling.json", "scan.csv", "scan.json"] {
        assert_eq!(
            fs::read(runs[0].path().join(f)).unwrap(),
            fs::read(runs[1].path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn threads_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qkr"))
        .args(["evolve", "--kicks", "2", "--out", tmp.path().to_str().unwrap()])
        .env("QKR_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_qkr"))
        .args(["evolve", "--kicks", "2", "--out", tmp.path().to_str().unwrap()])
        .env("QKR_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn resonance_output_is_uniform() {
    let tmp = TempDir::new().unwrap();
    ok(&["evolve", "--kicks", "40", "--epsilon", "0", "--out", tmp.path().to_str().unwrap()], tmp.path());
    let density = column(&read(tmp.path().join("position.csv")), 1);
    assert!(density.iter().all(|d| (d - 1.0 / (2.0 * PI)).abs() < 1e-10));
}

#[test]
fn detuned_position_peaks_while_momentum_barely_moves() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["evolve", "--kicks", "40", "--epsilon", "0", "--out", a.to_str().unwrap()], tmp.path());
    ok(&["evolve", "--kicks", "40", "--epsilon", "1e-8", "--out", b.to_str().unwrap()], tmp.path());
    let pa = column(&read(a.join("momentum.csv")), 1);
    let pb = column(&read(b.join("momentum.csv")), 1);
    let l1: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum();
    assert!(l1 < 1e-3);
    let density = column(&read(b.join("position.csv")), 1);
    assert!(density.iter().any(|d| (d - 1.0 / (2.0 * PI)).abs() > 1e-8));
}

#[test]
fn perturbative_columns() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["perturbative", "--kicks", "5", "--epsilon", "0", "--out", out], tmp.path());
    let text = read(tmp.path().join("perturbative.csv"));
    assert!(text.starts_with("X,numerical,perturbative,difference\n"));
    for c in [1, 2] {
        assert!(column(&text, c).iter().all(|v| (v - 1.0 / (2.0 * PI)).abs() < 1e-12));
    }
    assert!(column(&text, 3).iter().all(|v| v.abs() < 1e-12));

    let worst = |eps: &str| {
        let dir = tmp.path().join(eps);
        ok(&["perturbative", "--kicks", "5", "--epsilon", eps, "--out", dir.to_str().unwrap()], tmp.path());
        column(&read(dir.join("perturbative.csv")), 3)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let ratio = worst("1e-7") / worst("5e-8");
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn scan_centre_rows() {
    let tmp = TempDir::new().unwrap();
    for (mode, want) in [("position", PI / 3f64.sqrt()), ("fidelity", 1.0)] {
        let dir = tmp.path().join(mode);
        ok(&["scan", "--kicks", "5", "--mode", mode, "--out", dir.to_str().unwrap()], tmp.path());
        let text = read(dir.join("scan.csv"));
        assert!(text.starts_with("epsilon,value\n"));
        let eps = column(&text, 0);
        let val = column(&text, 1);
        assert_eq!(eps.len(), 65);
        assert_eq!(eps[32], 0.0);
        assert!((val[32] - want).abs() < 1e-6, "{mode}: {}", val[32]);
    }
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let code = |args: &[&str]| qkr(args, tmp.path()).status.code();
    assert_eq!(code(&["evolve", "--kicks", "1", "--out", out]), Some(0));
    assert_eq!(code(&["evolve"]), Some(2));
    assert_eq!(code(&["evolve", "--kicks", "x"]), Some(2));
    assert_eq!(code(&["evolve", "--kicks", "3", "--phi-d", "-1", "--out", out]), Some(2));
    assert_eq!(code(&["evolve", "--kicks", "3", "--grid", "16", "--out", out]), Some(2));
    assert_eq!(code(&["scan", "--kicks", "5", "--mode", "position", "--points", "34", "--out", out]), Some(2));
    assert_eq!(code(&["scaling", "--n-from", "5", "--n-to", "6", "--out", out]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));

    let leak = qkr(&["evolve", "--kicks", "40", "--basis", "4", "--out", out], tmp.path());
    assert_eq!(leak.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&leak.stderr).contains("leakage"));

    let fixture = tmp.path().join("noisy.csv");
    fs::write(&fixture, "N,width\n2,1.0\n3,0.1\n4,1.0\n5,0.1\n6,1.0\n").unwrap();
    let refused = qkr(
        &["scaling", "--mode", "position", "--fixture", fixture.to_str().unwrap(), "--out", out],
        tmp.path(),
    );
    assert_eq!(refused.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("r_squared"));
}
