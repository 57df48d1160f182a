use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_finitebath"))
}

const CONFIG: &str = r#"{
    "bath1_n": 120, "bath1_mass": 0.001, "bath1_temperature": 5.0,
    "bath1_omega_ir": 0.2, "bath1_omega_uv": 1.0,
    "omega_grid": [0.3, 0.6],
    "seeds": [1, 2],
    "n_samples": 400
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_writes_curve_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("omega,T_tp,T_tp_err,goodness,overflow_frac,T_bath_init,T_bath_final"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([1, 2]));
    assert_eq!(manifest["config"]["bath1_n"], 120);
}

#[test]
fn rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert!(bin()
            .args(["sweep", "--seed-list", "7", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success());
        fs::read_to_string(out.join("curve.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn single_then_offline_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("single");
    assert!(bin()
        .args(["single", "--omega", "0.5", "--set", "n_samples=2000", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    assert!(out.join("histogram.json").exists());
    let fit = bin().arg("fit").arg(out.join("histogram.csv")).output().unwrap();
    assert!(fit.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(v["temperature"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"bath1_omega_ir\": 0.2", "\"bath1_omega_ir\": 3.0"));
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bath1_omega_ir") && err.contains("bath1_omega_uv"), "{err}");

    let cfg = write_config(dir.path(), CONFIG);
    let out = bin().args(["sweep", "--set", "bogus=1", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_thermal_data_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.txt");
    let energies: String = (0..1000).map(|i| format!("{}\n", 1.0 + (i % 10) as f64 * 0.01)).collect();
    fs::write(&path, energies).unwrap();
    let out = bin().arg("fit").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn effective_temperature_oracle() {
    let out = bin()
        .args(["oracle", "effective-temperature", "--energy", "0", "--t1", "5", "--t2", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["effective_temperature"].as_f64(), Some(7.5));
}

#[test]
fn twobath_writes_three_curves() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "bath1_n": 20, "bath1_mass": 0.001, "bath1_temperature": 5.0,
        "bath1_omega_ir": 0.2, "bath1_omega_uv": 1.0,
        "bath2_n": 20, "bath2_mass": 0.001, "bath2_temperature": 10.0,
        "bath2_omega_ir": 0.2, "bath2_omega_uv": 1.0,
        "omega_grid": [0.5], "n_samples": 100, "sample_interval": 2.0
    }"#;
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("two");
    let status = bin().args(["twobath", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    for name in ["switched.csv", "bath1_alone.csv", "bath2_alone.csv", "manifest.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}
