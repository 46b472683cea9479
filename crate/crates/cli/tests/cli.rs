use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use lco_core::io;
use lco_core::model::{linear_eigen, ModeKind};
use num_complex::Complex64;
use serde_json::Value;

fn lco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lco")).args(args).output().expect("binary runs")
}

fn generate(dir: &Path, config: &str) {
    let out = lco(&["generate", "--config", config, "--size", "small", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn run(case: &Path, mode: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--case", case.to_str().unwrap(), "--mode", mode, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lco(&args)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn non_spd_mass_is_rejected_with_the_invariant_named() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "1");
    let path = tmp.path().join("model.json");
    let mut model: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    model["mass"][0][0] = Value::from(-1.0);
    std::fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
    let out = run(&tmp.path().join("case.json"), "refined", &tmp.path().join("r"), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("positive definite"), "{err}");
}

#[test]
fn malformed_case_reports_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "1");
    let case = tmp.path().join("case.json");
    let text = std::fs::read_to_string(&case).unwrap().replace("\"harmonics\": 1", "\"harmonics\": one");
    std::fs::write(&case, text).unwrap();
    let out = run(&case, "refined", &tmp.path().join("r"), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn refined_on_config_one_finds_one_stable_cycle_at_the_stick_frequency() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "1");
    let r = tmp.path().join("r");
    let out = run(&tmp.path().join("case.json"), "refined", &r, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&r);
    assert_eq!(s["schema"], "lco-summary/1");
    let records = s["records"].as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["stability"], "stable");
    let f = records[0]["frequency_hz"].as_f64().unwrap();
    assert!((f / 520.0 - 1.0).abs() < 1e-4, "{f}");
    for key in ["sensor_amplitude", "sensor_over_span", "damping_aero", "damping_structure", "mac_stick"] {
        assert!(records[0][key].is_number(), "{key}");
    }
    assert!(records[0]["energy_balance_defect"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn repeated_runs_write_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "2");
    let case = tmp.path().join("case.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = run(&case, "coupled", d, &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["summary.json", "curve.csv", "backbone.csv", "trace_0.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

/// `D^a = -Im(psi^H G psi) / (2 w^2)` for a mass-normalized mode.
fn linear_aero_damping(psi: &[Complex64], g: &[Vec<[f64; 2]>], omega: f64) -> f64 {
    let mut q = Complex64::new(0.0, 0.0);
    for (i, row) in g.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            q += psi[i].conj() * Complex64::new(z[0], z[1]) * psi[j];
        }
    }
    -q.im / (2.0 * omega * omega)
}

#[test]
fn flutter_curve_matches_the_stored_influence_matrices_and_flips_sign() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "2");
    let r = tmp.path().join("r");
    let out = run(&tmp.path().join("case.json"), "flutter-curve", &r, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let model: io::ModelFile = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("model.json")).unwrap()).unwrap();
    let aero: io::AeroFile = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("aero.json")).unwrap()).unwrap();
    let (m, contacts) = model.build().unwrap();
    let stick = &linear_eigen(&m, &contacts, ModeKind::Stick).unwrap()[0];
    let slip = &linear_eigen(&m, &contacts, ModeKind::Slip).unwrap()[0];

    let csv = std::fs::read_to_string(r.join("flutter.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("nodal_diameter"));
    let rows: Vec<(i32, f64, f64)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].parse().unwrap(), c[1].parse().unwrap(), c[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), aero.sets.len());
    for (row, set) in rows.iter().zip(&aero.sets) {
        assert_eq!(row.0, set.nodal_diameter);
        let ds = linear_aero_damping(stick.shape.as_slice(), &set.g_stick, stick.omega);
        let dl = linear_aero_damping(slip.shape.as_slice(), &set.g_slip, slip.omega);
        assert!((row.1 - ds).abs() <= 1e-9 * ds.abs().max(1e-6), "{} vs {ds}", row.1);
        assert!((row.2 - dl).abs() <= 1e-9 * dl.abs().max(1e-6), "{} vs {dl}", row.2);
    }
    let flips = |f: fn(&(i32, f64, f64)) -> f64| rows.windows(2).filter(|w| (f(&w[0]) < 0.0) != (f(&w[1]) < 0.0)).count();
    assert!(flips(|r| r.1) > 0 && flips(|r| r.2) > 0);
    let target = rows.iter().find(|r| r.0 == -4).unwrap();
    assert!(target.1 > 0.0 && target.2 < 0.0);
    assert!((slip.omega / stick.omega - 418.0 / 520.0).abs() < 1e-3);
    assert!((stick.omega / (2.0 * PI) - 520.0).abs() < 1e-6);
}

#[test]
fn verify_mode_passes_on_config_one() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "1");
    let r = tmp.path().join("r");
    let out = run(&tmp.path().join("case.json"), "verify", &r, &["--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&r);
    let checks = s["checks"].as_array().unwrap();
    assert!(checks.len() >= 6);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn overrides_are_validated() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "1");
    let case = tmp.path().join("case.json");
    let out = run(&case, "coupled", &tmp.path().join("r"), &["--relax", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("relaxation"));
    let out = run(&case, "refined", &tmp.path().join("r"), &["--nd", "99"]);
    assert!(!out.status.success());
}

#[test]
fn coupled_cap_failure_gives_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "2");
    let case = tmp.path().join("case.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&case).unwrap()).unwrap();
    v["analysis"]["coupling"]["max_outer"] = Value::from(1);
    std::fs::write(&case, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let r = tmp.path().join("r");
    let out = run(&case, "coupled", &r, &[]);
    assert_eq!(out.status.code(), Some(1));
    let s = summary(&r);
    assert!(s["checks"].as_array().unwrap().iter().any(|c| c["passed"] == false));
}
