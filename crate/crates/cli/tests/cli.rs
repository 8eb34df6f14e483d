use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn phcoh(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phcoh"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn phcoh")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = phcoh(dir, args);
    assert!(
        out.status.success(),
        "phcoh {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a CSV written by the CLI, skipping `#` lines and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn single_pi_pulse_gives_three_quarters() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["hom-sweep", "--theta", "1", "--phi", "none", "-o", "h.csv"]);
    let text = fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(text.starts_with("# config: {"));
    assert!(text.lines().nth(1).unwrap().starts_with("# constants_sha256: "));

    let rows = rows(&dir.path().join("h.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "", "averaged rows leave phi empty");
    let g2_k1: f64 = rows[0][4].parse().unwrap();
    assert!((g2_k1 - 0.75).abs() < 1e-12);
    assert!(dir.path().join("h.summary.json").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"theta_pi": {"start": 0.5, "stop": 0.5, "steps": 1}, "phi_pi": null, "m": [0.9]}"#,
    )
    .unwrap();
    ok(dir.path(), &["hom-sweep", "--config", "cfg.json", "--m", "0.7", "-o", "h.csv"]);
    let rows = rows(&dir.path().join("h.csv"));
    assert_eq!(rows.len(), 1);
    let theta: f64 = rows[0][0].parse().unwrap();
    assert!((theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "file value kept");
    assert_eq!(rows[0][2], "0.7", "flag wins over file");
}

#[test]
fn bad_config_exits_two() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"theta_pii": 1}"#).unwrap();
    let unknown = phcoh(dir.path(), &["hom-sweep", "--config", "cfg.json"]);
    assert_eq!(unknown.status.code(), Some(2));

    let out_of_range = phcoh(dir.path(), &["hom-sweep", "--theta", "0:3:4"]);
    assert_eq!(out_of_range.status.code(), Some(2));

    let missing = phcoh(dir.path(), &["hom-sweep", "--config", "absent.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad_efficiency = phcoh(dir.path(), &["timetag-gen", "--eta1", "1.5"]);
    assert_eq!(bad_efficiency.status.code(), Some(2));
}

#[test]
fn cnot_herald_peaks_near_six_percent() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["cnot", "--theta", "0.6:0.8:21", "-o", "c.csv"]);
    let rows = rows(&dir.path().join("c.csv"));
    assert_eq!(rows.len(), 21);
    let peak = rows
        .iter()
        .map(|r| r[5].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!((peak - 0.0585).abs() < 0.0005, "peak {peak}");
    for r in &rows {
        let fidelity: f64 = r[6].parse().unwrap();
        let bayes: f64 = r[8].parse().unwrap();
        assert!((fidelity - bayes).abs() < 1e-9);
    }
    let summary = json(&dir.path().join("c.summary.json"));
    assert!(summary["max_bayes_gap"].as_f64().unwrap() < 1e-9);
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = ["hom-sweep", "--theta", "0.2:1:5", "--phi", "0:1:3", "--m", "1,0.8", "-o"];
    ok(dir.path(), &[&args[..], &["a.csv"]].concat());
    ok(dir.path(), &[&args[..], &["b.csv"]].concat());
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    // Only the echoed output path differs.
    assert_eq!(a.replace("a.csv", "b.csv"), b);
}

#[test]
fn generated_stream_round_trips_through_analysis() {
    let dir = TempDir::new().unwrap();
    let gen = |seed: &str, out: &str, perpendicular: bool| {
        let mut args = vec!["timetag-gen", "--theta", "0.22", "--pulses", "1000000", "--seed", seed, "-o", out];
        if perpendicular {
            args.push("--perpendicular");
        }
        ok(dir.path(), &args);
    };
    gen("11", "par.bin", false);
    gen("12", "perp.csv", true);
    let meta = json(&dir.path().join("par.bin.meta.json"));
    assert_eq!(meta["generator"]["n_pulses"], 1_000_000);
    assert_eq!(meta["records_sha256"].as_str().unwrap().len(), 64);

    let analyze = |out: &str| {
        ok(
            dir.path(),
            &["timetag-analyze", "par.bin", "--perpendicular", "perp.csv", "--seed", "3", "-o", out],
        )
    };
    let stdout = analyze("e1.json");
    let report = json(&dir.path().join("e1.json"));
    let c1 = &report["estimate"]["c1"];
    let (value, sigma) = (c1["value"].as_f64().unwrap(), c1["sigma"].as_f64().unwrap());
    let truth = (0.11 * std::f64::consts::PI).cos().powi(2);
    assert!((value - truth).abs() < 3.0 * sigma, "c1 {value} ± {sigma} vs {truth}");

    assert!(stdout.contains("report_sha256: "));
    analyze("e2.json");
    let a = fs::read_to_string(dir.path().join("e1.json")).unwrap();
    let b = fs::read_to_string(dir.path().join("e2.json")).unwrap();
    assert_eq!(a.replace("e1.json", "e2.json"), b);
}

#[test]
fn repeated_analysis_reproduces_report_hash() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["timetag-gen", "--pulses", "300000", "--drift-period", "300000", "--seed", "5"]);
    let hash = |stdout: String| stdout.lines().find_map(|l| l.strip_prefix("report_sha256: ")).map(str::to_owned);
    let first = hash(ok(dir.path(), &["timetag-analyze", "stream.bin", "--bootstrap", "50"]));
    let second = hash(ok(dir.path(), &["timetag-analyze", "stream.bin", "--bootstrap", "50"]));
    assert!(first.is_some());
    assert_eq!(first, second);
}

#[test]
fn empty_stream_is_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.bin"), b"").unwrap();
    let out = phcoh(dir.path(), &["timetag-analyze", "empty.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("estimate.json").exists());

    let no_input = phcoh(dir.path(), &["timetag-analyze"]);
    assert_eq!(no_input.status.code(), Some(2));
}

#[test]
fn concurrence_of_the_ideal_state() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["concurrence", "--phi", "0.4"]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert!((report["concurrence"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);

    ok(dir.path(), &["concurrence", "--s", "0.5", "-o", "c.json"]);
    let report = json(&dir.path().join("c.json"));
    assert!((report["matched_concurrence"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(report["constants_sha256"].is_string());
}

#[test]
fn workers_flag_and_env_are_accepted() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_phcoh"))
        .current_dir(dir.path())
        .env("PHCOH_WORKERS", "2")
        .args(["cnot", "--theta", "0.5:0.6:2", "--inputs", "optimize"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let zero = phcoh(dir.path(), &["--workers", "0", "concurrence"]);
    assert_eq!(zero.status.code(), Some(2));
}
