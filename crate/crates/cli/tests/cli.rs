use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn instance(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "instances", name]
        .iter()
        .collect();
    p.display().to_string()
}

fn acbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_ms");
    v
}

#[test]
fn solve_nested_is_in_band() {
    let out = acbc(&["solve", "--instance", &instance("nested.json"), "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let u0 = v["U0"].as_f64().unwrap();
    assert!((0.0..=0.1).contains(&u0));
    assert_eq!(v["delta"].as_array().unwrap().len(), 3);
    assert_eq!(v["V0"][0]["node"], 0);
}

#[test]
fn check_reports_violation_witness() {
    let out = acbc(&["check", "--instance", &instance("violation.json")]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["feasible"], false);
    let w = &v["violations"][0];
    for key in ["t", "from", "to", "axis", "endpoint", "witness"] {
        assert!(w.get(key).is_some(), "missing {key}");
    }
    assert_eq!(w["endpoint"], "hi");
}

#[test]
fn check_passes_and_estimates_constants() {
    let out = acbc(&["check", "--instance", &instance("three_node.json"), "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["estimated"]["l_theta"].as_f64().unwrap() <= 1.0 + 1e-9);
    assert!(v["estimated"]["l_c"].as_f64().unwrap() <= 1.0 + 1e-9);
}

#[test]
fn malformed_instances_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut text: Value = serde_json::from_str(&std::fs::read_to_string(instance("nested.json")).unwrap()).unwrap();
    text["extra"] = Value::Bool(true);
    std::fs::write(&path, text.to_string()).unwrap();
    let out = acbc(&["solve", "--instance", path.to_str().unwrap(), "--epsilon", "0.4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = acbc(&["solve", "--instance", "/nonexistent.json", "--epsilon", "0.4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = acbc(&["solve", "--instance", &instance("nested.json"), "--epsilon", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = acbc(&["solve", "--instance", &instance("violation.json"), "--epsilon", "0.4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn equilibrium_trajectory_sums_to_u0() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let inst = instance("three_node.json");
    let out = acbc(&[
        "simulate",
        "--instance",
        &inst,
        "--epsilon",
        "0.5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,node,vertex_id,x0,x1,step_cost"));
    let steps: Vec<f64> = lines
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let total = steps.iter().rev().fold(0.0, |acc, c| c + acc);
    let solved = json(&acbc(&["solve", "--instance", &inst, "--epsilon", "0.5"]));
    assert_eq!(total, solved["U0"].as_f64().unwrap());
}

#[test]
fn deviating_strategies() {
    let inst = instance("three_node.json");
    let base = ["simulate", "--instance", inst.as_str(), "--epsilon", "0.5"];
    let run = |extra: &[&str]| {
        let out = acbc(&[&base[..], extra].concat());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        (v["total_cost"].as_f64().unwrap(), v["U0"].as_f64().unwrap())
    };
    let (c, u0) = run(&["--opponent", "deviate:0:2"]);
    assert!(c <= u0);
    let (c, u0) = run(&["--player", "deviate:1:2"]);
    assert!(c >= u0);
    let (c, u0) = run(&["--opponent", "random:5"]);
    assert!(c <= u0);
    let (c, u0) = run(&["--player", "greedy"]);
    assert!(c >= u0);
    let out = acbc(&[&base[..], &["--player", "teleport"]].concat());
    assert_eq!(out.status.code(), Some(1));
    let out = acbc(&[&base[..], &["--player", "deviate:0:1"]].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_requires_true_value() {
    let out = acbc(&["sweep", "--instance", &instance("nested.json"), "--epsilons", "0.4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = acbc(&[
        "sweep",
        "--instance",
        &instance("nested.json"),
        "--epsilons",
        "0.4,0",
        "--true-value",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_rows_sorted_and_dominated() {
    let out = acbc(&[
        "sweep",
        "--instance",
        &instance("nested.json"),
        "--epsilons",
        "0.2,0.4",
        "--true-value",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("desired_error,actual_error,u0,mesh_total,wall_ms"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.4);
    assert_eq!(rows[1][0], 0.2);
    assert!(rows.iter().all(|r| r[1] <= r[0] && r[1] >= 0.0));
}

#[test]
fn outputs_are_stable_across_runs() {
    let inst = instance("three_node.json");
    let solve = || without_timing(json(&acbc(&["solve", "--instance", &inst, "--epsilon", "0.5"])));
    assert_eq!(solve(), solve());
    let sim = || {
        acbc(&[
            "simulate",
            "--instance",
            &inst,
            "--epsilon",
            "0.5",
            "--opponent",
            "random:2",
        ])
        .stdout
    };
    assert_eq!(sim(), sim());
    let dir = tempfile::tempdir().unwrap();
    let table = |name: &str| {
        let p = dir.path().join(name);
        acbc(&[
            "solve",
            "--instance",
            &inst,
            "--epsilon",
            "0.5",
            "--out",
            p.to_str().unwrap(),
        ]);
        std::fs::read(p).unwrap()
    };
    let a = table("a.csv");
    assert_eq!(a, table("b.csv"));
    assert!(a.starts_with(b"t,kind,vertex_id,node,value,best_action\n"));
}

#[test]
fn hidden_oracle_flag_cross_checks() {
    let out = acbc(&[
        "solve",
        "--instance",
        &instance("tiny_cycle.json"),
        "--epsilon",
        "3",
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["oracle"]["mismatches"], 0);
    let help = String::from_utf8(acbc(&["solve", "--help"]).stdout).unwrap();
    assert!(!help.contains("--oracle"));
}

#[test]
fn mesh_and_export() {
    let out = acbc(&["mesh", "--instance", &instance("tiny_square.json"), "--epsilon", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verified"], true);
    assert!(v["report"]["intersections"]["worst_slack"].as_f64().unwrap() >= 0.0);

    let dir = tempfile::tempdir().unwrap();
    let out = acbc(&[
        "export",
        "--instance",
        &instance("myopic.json"),
        "--epsilon",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let values = std::fs::read_to_string(dir.path().join("values.csv")).unwrap();
    assert!(values.starts_with("t,node,vertex_id,x0,value,best_action\n"));
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn l_theta_override_coarsens() {
    let inst = instance("nested.json");
    let base = json(&acbc(&["solve", "--instance", &inst, "--epsilon", "0.2"]));
    let loose = json(&acbc(&[
        "solve",
        "--instance",
        &inst,
        "--epsilon",
        "0.2",
        "--l-theta-override",
        "0",
    ]));
    assert!(loose["mesh_total"].as_u64().unwrap() < base["mesh_total"].as_u64().unwrap());
    assert_eq!(loose["l_theta"], 0.0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(acbc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(acbc(&["solve"]).status.code(), Some(1));
    assert_eq!(acbc(&["--help"]).status.code(), Some(0));
}
