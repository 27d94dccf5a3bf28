use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PHI_JWM: f64 = std::f64::consts::FRAC_PI_2 + 0.071;

fn weakdelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakdelay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn data_rows(p: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

fn simulate(dir: &TempDir, config: &str, name: &str) -> String {
    let cfg = write(dir, &format!("{name}.json"), config);
    let out = path(dir, name);
    let o = weakdelay(&["simulate", "--config", &cfg, "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn noise_free_simulation_has_full_grid() {
    let dir = TempDir::new().unwrap();
    let rec = simulate(&dir, r#"{"photons": 0, "tau_fs": 0.01}"#, "r.csv");
    let rows = data_rows(&rec);
    assert_eq!(rows.len(), 2101);
    let total: f64 = rows.iter().map(|r| r[1] + r[2]).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(format!("{rec}.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 0);
    assert_eq!(sidecar["photons"], 0);
    assert!(sidecar["plates"]["h1_mm"].as_f64().unwrap() > 1.0);
}

#[test]
fn seeded_simulation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"photons": 100000, "seed": 7, "tau_fs": 0.01}"#;
    let a = simulate(&dir, cfg, "a.csv");
    let b = simulate(&dir, cfg, "b.csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let total: f64 = data_rows(&a).iter().map(|r| r[1] + r[2]).sum();
    assert_eq!(total, 100000.0);
}

#[test]
fn estimate_round_trip_and_all_methods() {
    let dir = TempDir::new().unwrap();
    let rec = simulate(&dir, r#"{"photons": 0, "tau_fs": 0.01}"#, "r.csv");
    let phi = PHI_JWM.to_string();
    let o = weakdelay(&["estimate", "--records", &rec, "--method", "exact", "--phi", &phi]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["method"], "exact");
    assert!((v["tau_s"].as_f64().unwrap() / 1e-17 - 1.0).abs() < 1e-3);
    assert!((v["tau_fs"].as_f64().unwrap() - 0.01).abs() < 1e-5);

    let o = weakdelay(&["estimate", "--records", &rec, "--method", "all", "--phi", &phi]);
    let all = stdout_json(&o);
    let names: Vec<&str> = all.as_array().unwrap().iter().map(|o| o["method"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["exact", "quartic", "first_order", "jwm_simplified", "strubi_reference", "wva_first_order", "wva_mean_shift"]
    );
}

#[test]
fn malformed_record_exits_2_with_row() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.csv", "wavelength_nm,counts_port1,counts_port2\n700,1,1\n701,1,1\n702,NaN,1\n");
    let o = weakdelay(&["estimate", "--records", &bad, "--method", "first_order", "--phi", "1.6"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "format");
    assert!(err["error"]["message"].as_str().unwrap().contains(":4:"));
}

#[test]
fn missing_phi_is_input_error() {
    let dir = TempDir::new().unwrap();
    let rec = simulate(&dir, r#"{"photons": 0, "tau_fs": 0.01}"#, "r.csv");
    let o = weakdelay(&["estimate", "--records", &rec, "--method", "first_order"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"]["kind"], "config");
    let o = weakdelay(&["estimate", "--records", &rec, "--method", "jwm_simplified"]);
    assert!(o.status.success());
}

#[test]
fn estimator_failure_exits_1_with_structured_error() {
    let dir = TempDir::new().unwrap();
    // All light in one bin: zero spectral variance.
    let rec = write(&dir, "line.csv", "wavelength_nm,counts_port1,counts_port2\n700,5,5\n701,0,0\n");
    let o = weakdelay(&["estimate", "--records", &rec, "--method", "jwm_simplified"]);
    assert_eq!(o.status.code(), Some(1));
    let v = stdout_json(&o);
    assert_eq!(v["method"], "jwm_simplified");
    assert!(v["error"]["kind"].is_string());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"tau_ps": 1}"#);
    let o = weakdelay(&["simulate", "--config", &cfg, "--out", &path(&dir, "x.csv")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(&path(&dir, "x.csv")).exists());
}

#[test]
fn sweep_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"photons": 0}"#);
    let out = path(&dir, "sweep.csv");
    let o = weakdelay(&[
        "sweep", "--config", &cfg, "--theta-min", "0", "--theta-max", "0.04", "--steps", "3", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "theta_rad,tau_theory_s,tau_exact_s,tau_first_order_s,tau_jwm_s,first_order_deviation_s"
    );
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1..].iter().all(|v| v.abs() < 1e-27));
    for r in &rows[1..] {
        assert!((r[2] / r[1] - 1.0).abs() < 1e-3);
    }
}

#[test]
fn wva_sweep_has_no_jwm_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"photons": 0, "phi_actual_rad": 0.03, "qwp": {"model": "dispersive"}}"#);
    let out = path(&dir, "sweep.csv");
    let o = weakdelay(&[
        "sweep", "--config", &cfg, "--theta-min", "0.02", "--theta-max", "0.04", "--steps", "2", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = std::fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "theta_rad,tau_theory_s,tau_exact_s,tau_first_order_s,first_order_deviation_s");
}

#[test]
fn snr_table_has_one_row_per_pair() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "snr.csv");
    let o = weakdelay(&[
        "snr", "--alphas", "0.005,0.01", "--phi-assumed", "0.03,0.05,0.08", "--trials", "30", "--photons", "100000",
        "--seed", "3", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[3] == 30.0));
}

#[test]
fn analytic_alpha_min() {
    let v = stdout_json(&weakdelay(&["analytic", "--alpha-min", "--epsilon", "0.0027"]));
    assert!((v["alpha_min_coefficient"].as_f64().unwrap() - 3.7).abs() < 0.05);
    assert!((v["alpha_min"].as_f64().unwrap() - 0.010).abs() < 2e-4);
    let v = stdout_json(&weakdelay(&["analytic", "--alpha", "0.01", "--beta", "0.01"]));
    assert!(v["delta_alpha"].as_f64().unwrap() > 0.0);
    let o = weakdelay(&["analytic", "--alpha-min", "--resolution-nm", "5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn waveplate_report() {
    let v = stdout_json(&weakdelay(&["waveplate", "--theta-rad", "0.02"]));
    let pi = std::f64::consts::PI;
    assert!((v["retardance_normal_rad"].as_f64().unwrap() - pi).abs() < 1e-12);
    assert!(v["pivot_delay_s"].as_f64().unwrap() > 0.0);
    let e = stdout_json(&weakdelay(&["waveplate", "--theta-rad", "0.02", "--pivot", "elevation"]));
    assert_eq!(e["pivot_delay_s"].as_f64().unwrap(), -v["pivot_delay_s"].as_f64().unwrap());
}

#[test]
fn help_lists_commands() {
    let o = weakdelay(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for c in ["simulate", "estimate", "sweep", "snr", "analytic", "waveplate"] {
        assert!(text.contains(c));
    }
}
