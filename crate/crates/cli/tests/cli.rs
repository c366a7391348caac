use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("thermocontact-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, config: &str, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_thermocontact"));
    cmd.arg("--config").arg(&path).arg("--out").arg(dir.join("out")).args(extra).env_clear();
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn equilibrium_mode_writes_profile() {
    let d = scratch("equilibrium");
    let o = run(&d, r#"{"mode": "equilibrium", "physical": {"gamma_jump": 0.01}}"#, &[], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&d);
    assert_eq!(r["flat"], false);
    assert!(r["linearized_sup_difference"].as_f64().unwrap() < 5e-4 * 0.75);
    // a positive wetting jump opens the corner beyond a right angle
    assert!(r["omega"].as_f64().unwrap() > std::f64::consts::FRAC_PI_2);
    let csv = fs::read_to_string(d.join("out/equilibrium.csv")).unwrap();
    assert!(csv.lines().count() > 100);
    // untimed modes still write the series schema
    let series = fs::read_to_string(d.join("out/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1);
    assert!(series.starts_with("t,E_total,D_total,E_eps,D_eps,"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("out/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["physical"]["gamma_jump"], 0.01);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn corner_probe_with_explicit_angle() {
    let d = scratch("corner");
    let o = run(&d, r#"{"mode": "corner-probe", "corner": {"omega": 2.356194490192345, "q": [1.2], "levels": [8, 16, 32]}}"#, &[], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&d);
    let gamma = r["gamma"].as_f64().unwrap();
    assert!((gamma - 2.0 / 3.0).abs() < 1e-8, "{gamma}");
    assert!((r["q_star"].as_f64().unwrap() - 1.5).abs() < 1e-8);
    assert!(d.join("out/probe_q1.2.csv").exists());
}

#[test]
fn invalid_configuration_exits_with_two() {
    let d = scratch("invalid");
    let o = run(&d, r#"{"mode": "decay", "physical": {"gamma_jump": 1.5}, "time": {"t_end": 0.1}}"#, &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Young relation violated"), "{err}");
    assert!(err.contains("decay fit needs"), "{err}");
    assert!(!d.join("out").exists());
}

#[test]
fn malformed_json_reports_location() {
    let d = scratch("malformed");
    let o = run(&d, "{\n  \"mode\": \"heat\",\n  \"grid\": {\"nx\": }\n}", &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn unknown_keys_rejected() {
    let d = scratch("unknown");
    let o = run(&d, r#"{"grid": {"nz": 4}}"#, &["--validate-only"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nz"));
}

#[test]
fn validate_only_runs_nothing() {
    let d = scratch("validate");
    let o = run(&d, "{}", &["--validate-only"], &[]);
    assert!(o.status.success());
    assert!(!d.join("out").exists());
    let o = run(&d, "{}", &["--validate-only"], &[("TCSIM_TIME__DT", "-1")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time.dt must be positive"));
}

#[test]
fn explicit_exponents_name_the_violated_constraint() {
    let d = scratch("exponents");
    let cfg = r#"{"mode": "equilibrium", "exponents": {"explicit": {"eps_minus": 0.2, "eps_plus": 0.3, "alpha": 0.11}}}"#;
    let o = run(&d, cfg, &["--validate-only"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha < eps_minus/2"));
}

#[test]
fn numerical_failure_exits_with_three_and_dumps_state() {
    let d = scratch("failure");
    // a large surface mode folds the flattening map within a few steps
    let cfg = r#"{"mode": "coupled", "grid": {"nx": 4}, "time": {"t_end": 0.5},
                  "initial": {"eta": [{"mode": 1, "amplitude": 0.9}], "u": [], "theta": []},
                  "output": {"plots": false}}"#;
    let o = run(&d, cfg, &[], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let failure: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("out/failure.json")).unwrap()).unwrap();
    assert!(failure["error"].as_str().unwrap().len() > 5);
    assert!(d.join("out/meta.json").exists());
}

#[test]
fn heat_mode_and_environment_override() {
    let d = scratch("heat");
    let o = run(&d, r#"{"mode": "heat", "grid": {"nx": 4}}"#, &[], &[("TCSIM_TIME__T_END", "0.2"), ("TCSIM_OUTPUT__CADENCE", "2")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&d);
    assert_eq!(r["steps"], 20);
    assert!(r["energy_identity_residual_over_dt2_norm2"].as_f64().unwrap() < 1e-3);
    let rows = thermocontact::io::parse_series_csv(&fs::read_to_string(d.join("out/series.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.values.contains_key("E_theta_L2") && !r.values.contains_key("E_u_L2")));
    for f in ["energy.svg", "log_energy.svg"] {
        assert!(fs::read_to_string(d.join("out").join(f)).unwrap().starts_with("<svg"));
    }
}

#[test]
fn seed_changes_random_initial_data() {
    let d = scratch("seed");
    let cfg = r#"{"mode": "coupled", "grid": {"nx": 4}, "time": {"t_end": 0.05},
                  "initial": {"random_modes": 2, "random_amplitude": 1e-3}, "output": {"plots": false}}"#;
    let series = |seed: &str| {
        let o = run(&d, cfg, &["--seed", seed], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(d.join("out/series.csv")).unwrap()
    };
    let (a, b, c) = (series("1"), series("2"), series("1"));
    assert_eq!(a, c);
    assert_ne!(a, b);
}
