use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = r#"
K = 2
T_schedule = [2.0, 4.0]
mc_samples = 5000
seed = 7
bl_samples = 128
trial_samples = 64

[operator]
m = 1.0
grid_points = 96
domain = { type = "interval", bc = "dirichlet" }

[kernel]
type = "delta"
g = 1.0
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlgibbs"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn spectrum_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = run(dir.path(), &["spectrum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("j,lambda_j,"));
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(json["eigenvalues"].as_array().unwrap().len(), 2);
}

#[test]
fn converge_reports_failed_properties_with_code_2() {
    // two low temperatures cannot show the required drop factors
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = run(dir.path(), &["converge", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL d_1 drops by a factor 3"), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 + 2);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn converge_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), QUICK);
    run(a.path(), &["converge", "--config", &cfg, "--threads", "1"]);
    run(b.path(), &["converge", "--config", &cfg, "--threads", "3"]);
    assert_eq!(
        fs::read(a.path().join("report.csv")).unwrap(),
        fs::read(b.path().join("report.csv")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let z = |seed: &str| {
        let out = run(dir.path(), &["sample", "--config", &cfg, "--seed", seed]);
        assert_eq!(out.status.code(), Some(0));
        let json: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("sample.json")).unwrap()).unwrap();
        json["z_r"]["mean"].as_f64().unwrap()
    };
    assert_eq!(z("1"), z("1"));
    assert_ne!(z("1"), z("2"));
    assert!(dir.path().join("gamma2_classical.csv").exists());
}

#[test]
fn selfcheck_and_bl_gap_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = run(dir.path(), &["selfcheck", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = run(dir.path(), &["bl-gap", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("bl_gap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn errors_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["quantum"]).status.code(), Some(1));
    let bad = write_config(dir.path(), &QUICK.replace("K = 2", "K = 2\nbogus = 1"));
    let out = run(dir.path(), &["quantum", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(1));
}

#[test]
fn quantum_writes_gibbs_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = run(dir.path(), &["quantum", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("quantum.json")).unwrap()).unwrap();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["top_two_sector_mass"].as_f64().unwrap() < 1e-8));
    assert!(dir.path().join("gamma1_T2.csv").exists());
}
