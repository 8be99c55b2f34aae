use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn hmcf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmcf")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap();
    line[key.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn audit_sphere_prints_minkowski_slack() {
    let dir = tempfile::tempdir().unwrap();
    let o = hmcf(&["audit-sphere", "--a", "-1", "--rho", "1", "--report", "r.json", "--csv", "r.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let slack = value_after(&out, "minkowski slack");
    let want = 32.0 * PI * PI * 1f64.sinh().powi(4);
    assert!((slack - want).abs() < 1e-6 * want, "{slack}");
    assert!(value_after(&out, "gauss-bonnet residual") < 1e-9);
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let names: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["gauss_bonnet", "minkowski", "santalo", "hconvex", "hconvex_mean_harmonic", "bonnesen"]);
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "name,lhs,rhs,slack,pass");
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn flow_writes_monotone_trace_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["flow", "--a", "-1", "--rho", "1", "--modes", "2,0,0.05", "--end-time", "0.2"];
    let o = hmcf(&[&args[..], &["--out", "t1.csv"]].concat(), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&hmcf(&[&args[..], &["--out", "t2.csv"]].concat(), dir.path())), 0);
    let t1 = std::fs::read(dir.path().join("t1.csv")).unwrap();
    assert_eq!(t1, std::fs::read(dir.path().join("t2.csv")).unwrap());
    let text = String::from_utf8(t1).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,area,M,Gtot,phi,kappa_min,F_max,dt");
    let phi: Vec<f64> = lines.map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert!(phi.len() > 10);
    assert!(phi.windows(2).all(|w| w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0)));
}

#[test]
fn config_file_supplies_options_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"a": -1, "rho": 1, "end_time": 0.5, "out": "trace.csv"}"#).unwrap();
    let o = hmcf(&["flow", "--config", "c.json", "--end-time", "0.05"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let last_t: f64 = text.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(last_t, 0.05);
    std::fs::write(dir.path().join("bad.json"), r#"{"a": -1, "radius": 1}"#).unwrap();
    assert_eq!(code(&hmcf(&["flow", "--config", "bad.json"], dir.path())), 2);
}

#[test]
fn ns_scan_confirms_expected_failures() {
    let dir = tempfile::tempdir().unwrap();
    let o = hmcf(&["ns-scan", "--r", "1,3", "--grid", "512x32", "--rows", "rows.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("expected failure confirmed")).count(), 1);
    let rows = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "r,eps,area,M,Gtot,volume");
    assert_eq!(rows.lines().count(), 7);
    assert_eq!(code(&hmcf(&["ns-scan", "--eps", "0.1"], dir.path())), 2);
}

#[test]
fn steiner_and_bonnesen_pass_on_spheres() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hmcf(&["steiner", "--a", "0", "--rho", "1", "--grid", "16x32"], dir.path())), 0);
    let o = hmcf(&["bonnesen", "--a", "-1", "--rho", "1", "--grid", "32x64"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = value_after(&stdout(&o), "volume");
    assert!((v - PI * (2f64.sinh() - 2.0)).abs() < 1e-9);
}

#[test]
fn parallel_exports_family_and_reports_reach() {
    let dir = tempfile::tempdir().unwrap();
    let o = hmcf(&["parallel", "--a", "-1", "--grid", "16x32", "--offsets=-0.3,0.2,0.4", "--out", "fam"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let index = std::fs::read_to_string(dir.path().join("fam/index.csv")).unwrap();
    assert_eq!(index.lines().next().unwrap(), "t,area,M,Gtot,volume");
    assert_eq!(index.lines().count(), 4);
    assert!(dir.path().join("fam/member_002.txt").exists());
    assert_eq!(code(&hmcf(&["parallel", "--grid", "16x32", "--offsets=-1.5"], dir.path())), 3);
}

#[test]
fn suite_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("ok.json"), r#"{"criteria": [1, 2], "summary": "summary.json"}"#).unwrap();
    assert_eq!(code(&hmcf(&["suite", "--config", "ok.json"], p)), 0);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["criteria"].as_array().unwrap().len(), 2);

    std::fs::write(p.join("zero.json"), r#"{"criteria": [1], "tolerances": {"sphere_rel": 0, "gauss_bonnet_rel": 0}}"#).unwrap();
    assert_eq!(code(&hmcf(&["suite", "--config", "zero.json"], p)), 1);
    assert_eq!(code(&hmcf(&["suite", "--config", "missing.json"], p)), 2);
    std::fs::write(p.join("unknown.json"), r#"{"criteria": [1], "speed": 2}"#).unwrap();
    assert_eq!(code(&hmcf(&["suite", "--config", "unknown.json"], p)), 2);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hmcf(&[], dir.path())), 2);
    assert_eq!(code(&hmcf(&["audit-sphere", "--a", "1"], dir.path())), 2);
    assert_eq!(code(&hmcf(&["flow", "--grid", "16"], dir.path())), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_hmcf"))
        .args(["audit-sphere", "--grid", "16x32"])
        .env("HMCF_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
