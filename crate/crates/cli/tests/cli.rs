use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn s6holo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s6holo"))
        .args(args)
        .env_remove("S6HOLO_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn ledger_rational_normal_curve() {
    let o = s6holo(&["ledger", "0", "6"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("c1(L_T, L_N, L_B) = (2, 4, -6)"));
    assert!(s.contains("h0(L_N) = 5, h0(L_B*) = 7"));
    assert!(s.contains("m1 = 24 (exact)"));
    assert!(s.contains("nullity >= 14"));
}

#[test]
fn ledger_gate_rejects_torus_of_degree_six() {
    let s = stdout(&s6holo(&["ledger", "1", "6"]));
    assert!(s.contains("gate: inadmissible"));
}

#[test]
fn ledger_json_reports_exact_multiplicity() {
    let o = s6holo(&["ledger", "7", "13", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["ledger"]["spectral"]["m1"]["kind"], "exact");
    assert_eq!(v["ledger"]["spectral"]["m1"]["value"], 52);
    assert!(v["verdicts"].as_array().unwrap().iter().all(|x| x["criterion"] == 9));
}

#[test]
fn ledger_impossible_degree_is_usage_error() {
    assert_eq!(s6holo(&["ledger", "0", "0"]).status.code(), Some(2));
}

#[test]
fn unknown_curve_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = s6holo(&["verify", "--curve", "enneper", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown curve"));
}

#[test]
fn mesh_level_out_of_range_exits_two() {
    assert_eq!(s6holo(&["spectrum", "--mesh-level", "9"]).status.code(), Some(2));
}

#[test]
fn too_many_eigenpairs_is_graceful() {
    let dir = tempfile::tempdir().unwrap();
    let o = s6holo(&["spectrum", "--curve", "geodesic-s2", "--mesh-level", "2", "--eigenpairs", "100000", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds the dimension"));
}

#[test]
fn spectrum_geodesic_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = s6holo(&["spectrum", "--curve", "geodesic-s2", "--mesh-level", "3", "--eigenpairs", "40", "--output", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue,cluster"));
    assert_eq!(lines.count(), 40);
    let r = json_file(&dir.path().join("report.json"));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["spectral"]["m1"], 4);
    assert_eq!(r["spectral"]["nullity_count"], 12);
    for v in r["verdicts"].as_array().unwrap() {
        assert!(v["criterion"].is_u64());
    }
}

#[test]
fn reports_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = s6holo(&["spectrum", "--curve", "geodesic-s2", "--mesh-level", "2", "--eigenpairs", "20", "--seed", "3", "--output", d.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in ["report.json", "eigenvalues.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_s6holo"))
        .args(["spectrum", "--curve", "geodesic-s2", "--mesh-level", "2", "--eigenpairs", "20"])
        .env("S6HOLO_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn config_file_supplies_values_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "curve = \"geodesic-s2\"\nmesh_level = 2\neigenpairs = 30\nseed = 5\n").unwrap();
    let out = dir.path().join("out");
    let o = s6holo(&["spectrum", "--config", cfg.to_str().unwrap(), "--eigenpairs", "20", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r = json_file(&out.join("report.json"));
    assert_eq!(r["config"]["curve"], "geodesic-s2");
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["eigenpairs"], 20);
    assert_eq!(r["config"]["mesh_level"], 2);
}

#[test]
fn verify_geodesic_skips_frame_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = s6holo(&["verify", "--curve", "geodesic-s2", "--mesh-level", "4", "--output", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("skipped: totally geodesic convention"));
    let r = json_file(&dir.path().join("verify.json"));
    assert_eq!(r["passed"], true);
}

#[test]
fn verify_names_first_failing_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = s6holo(&["verify", "--curve", "boruvka-raw", "--mesh-level", "2", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("verify failed: criterion 4"));
}

#[test]
fn align_writes_rotation_and_reusable_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = s6holo(&["align", "--curve", "boruvka-raw", "--mesh-level", "1", "--output", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let rot = std::fs::read_to_string(dir.path().join("rotation.txt")).unwrap();
    let vals: Vec<f64> = rot.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(vals.len(), 49);
    let r = json_file(&dir.path().join("align.json"));
    assert_eq!(r["rotation"].as_array().unwrap().len(), 49);
    assert!(r["torsion"]["max_abs_tau"].as_f64().unwrap() <= 1e-6);

    let curve = dir.path().join("aligned.curve");
    let out = dir.path().join("spectrum");
    let o = s6holo(&["spectrum", "--curve", curve.to_str().unwrap(), "--mesh-level", "2", "--eigenpairs", "30", "--output", out.to_str().unwrap()]);
    let r = json_file(&out.join("report.json"));
    assert_eq!(r["spectral"]["m1"], 24, "{}", stdout(&o));
}
