use std::path::{Path, PathBuf};
use std::process::Command;

use phgrid::config::{load_config, ScenarioConfig};
use phgrid::simulation::{ExplicitState, InitialCondition};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn phgrid(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_phgrid")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_config(dir: &Path, name: &str, cfg: &ScenarioConfig) -> String {
    let p = dir.join(name);
    std::fs::write(&p, cfg.to_json()).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn validate_fixture_passes() {
    let (code, out, _) = phgrid(&["validate", scenario("two_machine.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["structural"]["passed"], true);
    let names: Vec<&str> = v["structural"]["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"hessian_min_eigenvalue_at_steady_state"));
    assert!(names.contains(&"cost_matrix_min_eigenvalue"));
}

#[test]
fn validate_names_dissipation_axis() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(scenario("two_machine.json")).unwrap();
    cfg.machines[0].params.t_d_dprime = 10.0;
    let path = write_config(dir.path(), "bad.json", &cfg);
    let (code, out, err) = phgrid(&["validate", &path]);
    assert_eq!(code, 1);
    assert!(err.contains("machine_1_d_axis_dissipation_margin"));
    let v = json(&out);
    let failed: Vec<&str> = v["structural"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"machine_1_d_axis_dissipation_margin"));
    assert!(!failed.contains(&"machine_1_q_axis_dissipation_margin"));
}

#[test]
fn schema_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(scenario("two_machine.json")).unwrap();
    cfg.machines.clear();
    let path = write_config(dir.path(), "empty.json", &cfg);
    let (code, _, err) = phgrid(&["validate", &path]);
    assert_eq!(code, 1);
    assert!(err.contains("at least one machine"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n  \"machines\": [\n    { \"inertia\": }\n  ]\n}\n").unwrap();
    let (code, _, err) = phgrid(&["dispatch", broken.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");

    let (code, _, _) = phgrid(&["validate", "/no/such/file.json"]);
    assert_eq!(code, 1);
}

#[test]
fn dispatch_examples() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(scenario("two_machine.json")).unwrap();
    cfg.machines[0].p_d = 1.0;
    cfg.machines[1].p_d = 2.0;
    let (code, out, _) = phgrid(&["dispatch", &write_config(dir.path(), "a.json", &cfg)]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["lambda"].as_f64().unwrap() - 2.0).abs() < 1e-14);
    assert!((v["p_m"][0].as_f64().unwrap() - 2.0).abs() < 1e-14);
    assert!((v["p_m"][1].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert!(v["balance_residual"].as_f64().unwrap().abs() < 1e-12);

    cfg.machines[0].p_d = 0.0;
    cfg.machines[1].p_d = 0.0;
    let v = json(&phgrid(&["dispatch", &write_config(dir.path(), "b.json", &cfg)]).1);
    assert_eq!(v["p_m"], serde_json::json!([0.0, 0.0]));

    let mut one = cfg.clone();
    one.machines.truncate(1);
    one.machines[0].p_d = 0.7;
    one.lines.clear();
    one.controller.q = vec![vec![3.0]];
    one.controller.t.truncate(1);
    one.controller.k.truncate(1);
    one.controller.comm_edges.clear();
    let v = json(&phgrid(&["dispatch", &write_config(dir.path(), "c.json", &one)]).1);
    assert!((v["p_m"][0].as_f64().unwrap() - 0.7).abs() < 1e-15);
}

#[test]
fn steady_state_fixture_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = phgrid(&["steady-state", scenario("two_machine.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["residual_norm"].as_f64().unwrap() < 1e-10);
    assert!(v["hessian_min_eigenvalue"].as_f64().unwrap() > 0.0);

    // feed the solved equilibrium back as the initial state
    let state: ExplicitState = serde_json::from_value(v["state"].clone()).unwrap();
    let mut cfg = load_config(scenario("two_machine.json")).unwrap();
    cfg.initial = InitialCondition::Explicit(state);
    let (code, out, _) = phgrid(&["steady-state", &write_config(dir.path(), "eq.json", &cfg)]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["iterations"], 0);
}

#[test]
fn steady_state_far_guess_fails_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(scenario("two_machine.json")).unwrap();
    // demand far beyond what the tie line can carry
    cfg.machines[0].p_d = 6.0;
    cfg.machines[1].p_d = -4.0;
    cfg.controller.q = vec![vec![1.0, 0.0], vec![0.0, 1000.0]];
    let (code, out, err) = phgrid(&["steady-state", &write_config(dir.path(), "far.json", &cfg)]);
    assert_eq!(code, 2, "{out}\n{err}");
    assert_eq!(json(&out)["converged"], false);
    assert!(err.contains("residual trace"));
}

#[test]
fn simulate_sampling_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg10 = load_config(scenario("two_machine.json")).unwrap();
    cfg10.integrator.record_stride = 10;
    let path = write_config(dir.path(), "s10.json", &cfg10);
    let out10 = dir.path().join("run10");
    let (code, _, _) = phgrid(&["simulate", &path, "--out", out10.to_str().unwrap(), "--dt", "1e-3", "--t-end", "1"]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out10.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len() - 1, 101);
    for line in &lines {
        assert_eq!(line.split(',').count(), 1 + 8 * 2 + 3);
    }
    assert!(lines[0].starts_with("t,omega_1,delta_rel_1,Eq'_1,Ed'_1,Eq''_1,Ed''_1,Pm_1,Pe_1,omega_2"));
    assert!(lines[0].ends_with("H,H_shifted,sumPe"));
    let last: Vec<f64> = lines[101].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    let report = json(&std::fs::read_to_string(out10.join("report.json")).unwrap());
    assert!(report["integration_failure"].is_null());
}

#[test]
fn simulate_ring_reaches_rest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ring");
    let (code, out, _) = phgrid(&["simulate", scenario("three_machine_ring.json").to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["converged"], true);
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    for i in 0..3 {
        assert!(last[1 + 8 * i].abs() < 1e-6);
    }
}

#[test]
fn simulate_reports_integration_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("blowup");
    let (code, out, err) = phgrid(&[
        "simulate",
        scenario("two_machine.json").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--dt",
        "1.0",
        "--t-end",
        "200",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("integration failed at t ="));
    let report = json(&out);
    assert!(report["integration_failure"]["time"].as_f64().is_some());
}

#[test]
fn rk45_argument_conflict() {
    let (code, _, err) = phgrid(&["simulate", scenario("two_machine.json").to_str().unwrap(), "--method", "rk45", "--dt", "0.1"]);
    assert_eq!(code, 1);
    assert!(err.contains("--dt"));
}
