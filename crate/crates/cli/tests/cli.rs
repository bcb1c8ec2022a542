use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strausslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn exponents_report_for_damped_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.n = 1\nmodel.mu1 = 2\nmodel.mu2sq = 0\nmodel.p = 2\n");
    let out = run(&["exponents", "--config", &cfg, "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["regime"], "wave-like-subcritical");
    assert_eq!(v["gamma"], 2.0);
}

#[test]
fn exponents_at_mu_star_in_the_plane() {
    let dir = tempfile::tempdir().unwrap();
    // μ*(2) = (n² + n + 2)/(n + 2) = 2
    let cfg = write_config(dir.path(), "model.n = 2\nmodel.mu1 = 2\n");
    let out = run(&["exponents", "--config", &cfg, "--json"]);
    let v = stdout_json(&out);
    assert!((v["pS"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["pF_shifted"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.n = 1\nsolver.dtt = 0.1\n");
    let out = run(&["exponents", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.dtt"));
}

#[test]
fn verify_writes_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "checks = exponents, specfun, testfuncs, ledger, critical-ode\n");
    let a = run(&["verify", "--config", &cfg, "--json"]);
    let b = run(&["verify", "--config", &cfg, "--json", "--out", dir.path().to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(saved, stdout_json(&a));
    for (_, check) in saved.as_object().unwrap() {
        assert_eq!(check["pass"], true);
        assert!(check["metric"].is_number());
    }
}

#[test]
fn verify_default_config_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn verify_with_negative_delta_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.mu1 = 1\nmodel.mu2sq = 1\nchecks = exponents\n");
    let out = run(&["verify", "--config", &cfg, "--json"]);
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["exponents"]["pass"], false);
    assert!(v["exponents"]["error"].as_str().unwrap().contains("domain"));
}

#[test]
fn lifespan_sweep_csv_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "case = subcritical\nsweep.eps = 0.8, 0.6, 0.45\n");
    let out = run(&["lifespan-sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("lifespan_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "eps,T_est,converged,dt,status,T_1e3,T_1e4,T_1e5,T_1e6");
    let t: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(t.len(), 3);
    assert!(t.windows(2).all(|w| w[1] >= w[0]));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lifespan_fit.json")).unwrap()).unwrap();
    assert_eq!(fit["theoretical_slope"], -2.0);
    assert_eq!(fit["monotone"], true);
}

#[test]
fn single_eps_sweep_refuses_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.eps = 0.8\n");
    let out = run(&["lifespan-sweep", "--config", &cfg, "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!(v["fit"]["refused"].as_str().unwrap().contains("at least 3"));
}

#[test]
fn sweep_rejects_wrong_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "case = critical\n");
    let out = run(&["lifespan-sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn critical_ode_sweep_reports_translated_lifespan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "case = ode-critical\nmodel.p = 2\nsweep.eps = 0.8, 0.6, 0.45\n");
    let out = run(&["critical-ode-sweep", "--config", &cfg, "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["header"], serde_json::json!(["eps", "tau_star", "t_star", "steps", "status"]));
    for row in v["rows"].as_array().unwrap() {
        let tau: f64 = row[1].as_str().unwrap().parse().unwrap();
        let t: f64 = row[2].as_str().unwrap().parse().unwrap();
        assert!((t - (tau.exp() - 2.0)).abs() <= 1e-12 * t);
    }
}

#[test]
fn ledger_exports_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.n = 3\nmodel.mu1 = 0\nmodel.p = 2\nledger.j_max = 5\n");
    let out = run(&["ledger", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().nth(2).unwrap().starts_with("2,10,13,"));
    let cfg = write_config(dir.path(), "ledger.j_max = 500\n");
    assert_eq!(run(&["ledger", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn strauss_flag_sets_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.n = 3\nmodel.mu1 = 2\n");
    let v = stdout_json(&run(&["exponents", "--config", &cfg, "--pS", "--json"]));
    assert_eq!(v["regime"], "wave-like-critical");
}

#[test]
fn solve_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.eps = 0.8\nsolver.t_max = 12\ngrid.dr = 0.05\n");
    let out = run(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["trace"]["outcome"], "blow_up");
    assert!((v["T_est"].as_f64().unwrap() - 8.1).abs() < 0.05);
    let f = fs::read_to_string(dir.path().join("functionals.csv")).unwrap();
    assert!(f.starts_with("t,G,Lp,F,sup\n"));
    let s = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert!(s.starts_with("t,r,u\n"));
}
