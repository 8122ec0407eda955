use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fa_aircomp::experiments::{read_results, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fa-aircomp"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn solve_single_user_gives_wiener_mse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solution.json");
    let res = run(bin()
        .args(["solve", "--config"])
        .arg(configs().join("single_user.json"))
        .arg("--out")
        .arg(&out));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(res.stdout.is_empty());

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let total = doc["mse"]["total"].as_f64().unwrap();
    assert!((total - 0.5).abs() < 1e-12, "{total}");
    assert_eq!(doc["converged"], serde_json::Value::Bool(true));
    assert!(doc["trace"]["iterations"]
        .as_array()
        .is_some_and(|v| !v.is_empty()));
    assert_eq!(doc["solution"]["positions"].as_array().unwrap().len(), 1);
}

#[test]
fn sweep_writes_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let res = run(bin()
        .args(["sweep", "--geometries", "2", "--seed", "9", "--spec"])
        .arg(configs().join("uncertainty_sweep.json"))
        .arg("--out")
        .arg(&out));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 7 * 2 * 3);
    assert!(rows
        .iter()
        .all(|r| r.rng_seed == 9 && r.num_geometries == 2 && r.num_users == 10));
}

#[test]
fn validate_passes_for_documented_seed() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let res = run(bin()
        .args(["validate", "--seed", "7", "--report"])
        .arg(&report));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert_eq!(res.status.code(), Some(0), "{stderr}");
    assert!(!stderr.contains("FAIL"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc.as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(
        run(bin().args(["solve", "--config", "x.json"]))
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));

    let missing = run(bin()
        .args(["solve", "--config"])
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(dir.path().join("o.json")));
    assert_eq!(missing.status.code(), Some(2));

    let malformed = dir.path().join("bad.json");
    std::fs::write(&malformed, r#"{"num_users": 1, "num_antennas": 1}"#).unwrap();
    let res = run(bin()
        .args(["solve", "--config"])
        .arg(&malformed)
        .arg("--out")
        .arg(dir.path().join("o.json")));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("aperture_length"));

    // Nine antennas cannot fit in a 2-wavelength aperture at half-wavelength spacing.
    let crowded = dir.path().join("crowded.json");
    let text = std::fs::read_to_string(configs().join("single_user.json"))
        .unwrap()
        .replace("\"num_antennas\": 1", "\"num_antennas\": 9")
        .replace("\"aperture_length\": 8.0", "\"aperture_length\": 2.0");
    std::fs::write(&crowded, text).unwrap();
    let res = run(bin()
        .args(["solve", "--config"])
        .arg(&crowded)
        .arg("--out")
        .arg(dir.path().join("o.json")));
    assert_eq!(res.status.code(), Some(2));
    assert!(!dir.path().join("o.json").exists());

    // Vanishing noise with a rank-deficient signal covariance.
    let singular = dir.path().join("singular.json");
    let text = std::fs::read_to_string(configs().join("single_user.json"))
        .unwrap()
        .replace("\"num_antennas\": 1", "\"num_antennas\": 2")
        .replace("\"noise_power\": 1.0", "\"noise_power\": 1e-300");
    std::fs::write(&singular, text).unwrap();
    let res = run(bin()
        .args(["solve", "--config"])
        .arg(&singular)
        .arg("--out")
        .arg(dir.path().join("o.json")));
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}
