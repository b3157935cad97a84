use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ANNULUS: &str = r#"
[domain]
dim = 2
outer_radius = 2.0
[domain.body]
kind = "ball"
radius = 1.0
[coefficients]
d = 1.0
delta = 2.0
[grid]
nr = 12
ntheta = 12
[carleman]
s_values = [2.0, 4.0]
lambda_values = [1.0, 2.0]
"#;

const INTERVAL: &str = r#"
[domain]
dim = 1
outer_radius = 2.0
[domain.body]
kind = "ball"
radius = 1.0
[coefficients]
d = 1.0
delta = 2.0
q = 0.3
[grid]
nr = 16
[inverse]
alpha = 1e-6
lipschitz_samples = 4
[observability]
factors = [1.25, 1.5]
max_power_iters = 20
hum_factor = 1.1
"#;

fn dynwave(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dynwave"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certificate_of_the_unit_ball_annulus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = dynwave(dir.path(), ANNULUS, &["certify-geometry", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let cert = json(&out.join("certificate.json"));
    assert!((cert["rho"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert!((cert["c_prime"].as_f64().unwrap() - 2.0).abs() <= 1e-10);
    assert!((cert["t_star"].as_f64().unwrap() - 24f64.sqrt()).abs() <= 1e-12);
    let report = json(&out.join("report.json"));
    assert!(report["build"].as_str().unwrap().starts_with("dynwave "));
    assert_eq!(report["config"]["grid"]["nr"], 12);
}

#[test]
fn invalid_config_exits_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let res = dynwave(dir.path(), "[grid]\nnr = 3\nbogus = 1\n", &["certify-geometry"]);
    assert_eq!(res.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(err["error"]["kind"], "config_validation");
    let keys: Vec<&str> = err["error"]["issues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["key"].as_str().unwrap())
        .collect();
    assert!(keys.contains(&"domain") && keys.contains(&"coefficients.d"), "{keys:?}");
}

#[test]
fn module_errors_exit_nonzero_with_kind() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{ANNULUS}[weights]\nlambda = 300.0\n");
    let out = dir.path().join("out");
    let res = dynwave(dir.path(), &config, &["audit-carleman", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(err["error"]["kind"], "weight_overflow");
}

#[test]
fn carleman_audit_writes_ledger_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = dynwave(dir.path(), ANNULUS, &["audit-carleman", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let ledger = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 1 + 7 + 11);
    let scan = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 1 + 4);
}

#[test]
fn counterexample_table_has_both_bases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = dynwave(dir.path(), ANNULUS, &["counterexample", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let table = std::fs::read_to_string(out.join("counterexample.csv")).unwrap();
    assert!(table.starts_with("phi,coord_h11"));
    assert_eq!(table.lines().count(), 42);
    let report = json(&out.join("report.json"));
    assert!(report["result"]["max_deviation_from_closed_form"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn source_inversion_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let res = dynwave(
            dir.path(),
            INTERVAL,
            &["invert-source", "--out", out.to_str().unwrap(), "--seed", seed, "--threads", "2"],
        );
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
        out
    };
    let (a, b, c) = (run("a", "11"), run("b", "11"), run("c", "12"));
    let bytes = |dir: &Path, file: &str| std::fs::read(dir.join(file)).unwrap();
    for file in ["lipschitz.csv", "reconstruction_a.csv", "reconstruction_b.csv"] {
        assert!(bytes(&a, file) == bytes(&b, file), "{file} differs between identical runs");
    }
    // Reports differ only in the embedded output directory.
    assert_eq!(json(&a.join("report.json"))["result"], json(&b.join("report.json"))["result"]);
    assert!(bytes(&a, "lipschitz.csv") != bytes(&c, "lipschitz.csv"));
    assert_eq!(json(&a.join("report.json"))["config"]["seed"], 11);
}

#[test]
fn observability_sweep_emits_both_variants_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = dynwave(dir.path(), INTERVAL, &["observability-sweep", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let sweep = std::fs::read_to_string(out.join("obs_sweep.csv")).unwrap();
    assert!(sweep.starts_with("factor,T,c_obs_raw,c_obs_filtered"));
    assert_eq!(sweep.lines().count(), 3);
    let control = &json(&out.join("report.json"))["result"]["control"];
    assert!(control["terminal_energy_ratio"].as_f64().unwrap() < 1e-4);
    assert!(out.join("hum_control.csv").exists());
}
