use std::path::PathBuf;
use std::process::{Command, Output};

use fgdyn::fixtures::{PENDULUM_LENGTH, PENDULUM_MASS};
use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn fgdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgdyn")).args(args).output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = fgdyn(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn three_r_at_rest_without_gravity() {
    let urdf = fixture("three_r.urdf");
    let v = json_ok(&["solve", "--urdf", &urdf, "--type", "inverse", "--qdd", "0,0,0", "--gravity", "0 0 0"]);
    for t in v["solution"]["torques"].as_array().unwrap() {
        assert_eq!(t.as_f64().unwrap(), 0.0);
    }
    assert!(v["residualMax"].as_f64().unwrap() < 1e-10);
    for key in ["ordering", "fillIn", "edgeCount", "residualMax", "elapsedMicros", "buildMicros"] {
        assert!(!v[key].is_null(), "{key}");
    }
    for key in ["torques", "accels", "twists", "wrenches", "linkAccels"] {
        assert!(v["solution"][key].is_array(), "{key}");
    }
    assert_eq!(v["ordering"][0], "tau3");
}

#[test]
fn pendulum_holding_torque() {
    let urdf = fixture("pendulum.urdf");
    let v = json_ok(&["solve", "--urdf", &urdf, "--type", "inverse", "--q", "0", "--qdd", "0"]);
    let tau = v["solution"]["torques"][0].as_f64().unwrap();
    assert!((tau - PENDULUM_MASS * 9.81 * PENDULUM_LENGTH).abs() < 1e-10);
}

#[test]
fn five_bar_without_planar_loop_fails_on_loop_wrench() {
    let urdf = fixture("five_bar.urdf");
    let out = fgdyn(&["solve", "--urdf", &urdf, "--type", "forward", "--tau", "0.1,0.2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("F5"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);

    let v = json_ok(&["solve", "--urdf", &urdf, "--type", "forward", "--tau", "0.1,0.2", "--planar-loop", "j5:0 1 0"]);
    assert!(v["residualMax"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["solution"]["accels"].as_array().unwrap().len(), 5);
}

#[test]
fn five_bar_state_from_actuated_angles() {
    let urdf = fixture("five_bar.urdf");
    let v = json_ok(&[
        "solve", "--urdf", &urdf, "--type", "inverse", "--q", "0.1,-0.1,0,0", "--qd", "0.3,0.2,0,0", "--qdd", "0.5,0.5",
        "--planar-loop", "j5", "--min-torque-prior",
    ]);
    assert!(v["solution"]["torques"][0].is_number());
}

#[test]
fn hybrid_from_spec_object() {
    let urdf = fixture("three_r.urdf");
    let spec = r#"{"joints":[{"accel":1.0},{"torque":0.0},{"torque":0.5}],"gravity":[0,0,0]}"#;
    let v = json_ok(&["solve", "--urdf", &urdf, "--type", "hybrid", "--mixed", spec]);
    assert_eq!(v["solution"]["accels"][0], 1.0);
    assert_eq!(v["solution"]["torques"][2], 0.5);
    let array = r#"[{"accel":1.0},{"torque":0.0},{"torque":0.5}]"#;
    let w = json_ok(&["solve", "--urdf", &urdf, "--type", "hybrid", "--mixed", array, "--gravity", "0,0,0"]);
    assert_eq!(v["solution"], w["solution"]);
}

#[test]
fn error_exit_codes() {
    let out = fgdyn(&["solve", "--urdf", "/no/such/file.urdf", "--type", "inverse", "--qdd", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.urdf");
    std::fs::write(&bad, "<robot name='x'><link name='a'>").unwrap();
    let out = fgdyn(&["describe", "--urdf", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));

    let urdf = fixture("three_r.urdf");
    let out = fgdyn(&["solve", "--urdf", &urdf, "--type", "forward", "--tau", "0,0,0", "--ordering", "rnea"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("incompatible"));

    let out = fgdyn(&["solve", "--urdf", &urdf, "--type", "forward", "--qdd", "0,0,0"]);
    assert_eq!(out.status.code(), Some(1));

    let out = fgdyn(&["export", "--urdf", &urdf, "--type", "inverse", "--qdd", "0,0,0", "--out", "/no/such/dir/x.dot"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_factor_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.dot");
    let urdf = fixture("three_r.urdf");
    let out = fgdyn(&["export", "--urdf", &urdf, "--type", "inverse", "--qdd", "0,0,0", "--what", "graph", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let dot = std::fs::read_to_string(&path).unwrap();
    assert_eq!(dot.matches("[shape=circle]").count(), 9);
    assert_eq!(dot.matches("[shape=point").count(), 9);
    assert!(dot.contains("\"qdd1\" [shape=box]"));
}

#[test]
fn export_rnea_dag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.dot");
    let urdf = fixture("three_r.urdf");
    let out = fgdyn(&[
        "export", "--urdf", &urdf, "--type", "inverse", "--qdd", "0,0,0", "--what", "dag", "--ordering", "rnea", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let dot = std::fs::read_to_string(&path).unwrap();
    assert_eq!(dot.matches("[shape=circle]").count(), 9);
    let mut edges: Vec<&str> = dot.lines().filter(|l| l.contains("->")).map(str::trim).collect();
    edges.sort_unstable();
    let mut expected = vec![
        "\"F1\" -> \"tau1\";",
        "\"F2\" -> \"tau2\";",
        "\"F3\" -> \"tau3\";",
        "\"F2\" -> \"F1\";",
        "\"F3\" -> \"F2\";",
        "\"Vdot1\" -> \"F1\";",
        "\"Vdot2\" -> \"F2\";",
        "\"Vdot3\" -> \"F3\";",
        "\"Vdot2\" -> \"Vdot3\";",
        "\"Vdot1\" -> \"Vdot2\";",
    ];
    expected.sort_unstable();
    assert_eq!(edges, expected);
}

#[test]
fn export_empty_dag() {
    let dir = tempfile::tempdir().unwrap();
    let urdf = dir.path().join("base.urdf");
    std::fs::write(&urdf, "<robot name='base'><link name='base'/></robot>").unwrap();
    let path = dir.path().join("d.dot");
    let out = fgdyn(&[
        "export", "--urdf", urdf.to_str().unwrap(), "--type", "inverse", "--qdd", "", "--what", "dag", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "digraph elimination_dag {\n}\n");
}

#[test]
fn benchmark_rows_and_edges() {
    let puma = fixture("puma6r.urdf");
    let v = json_ok(&["benchmark", "--urdf", &puma, "--type", "inverse", "--orderings", "rnea,md,nd", "--trials", "5", "--json"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(v["maxDisagreement"].as_f64().unwrap() <= 1e-10);

    let three = fixture("three_r.urdf");
    let v = json_ok(&["benchmark", "--urdf", &three, "--type", "forward", "--orderings", "crba,aba", "--trials", "1", "--json"]);
    let edges: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r["edgeCount"].as_u64().unwrap()).collect();
    assert!(edges[1] < edges[0]);

    let out = fgdyn(&["benchmark", "--urdf", &three, "--type", "inverse", "--trials", "2"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.starts_with("ordering"));
    assert_eq!(table.lines().count(), 5);
}

fn without_times(mut v: Value) -> Value {
    if let Some(rows) = v.get_mut("rows").and_then(Value::as_array_mut) {
        for r in rows {
            r["meanMicros"] = Value::Null;
            r["medianMicros"] = Value::Null;
        }
    }
    for key in ["elapsedMicros", "buildMicros"] {
        if v.get(key).is_some() {
            v[key] = Value::Null;
        }
    }
    v
}

#[test]
fn same_seed_same_output() {
    let puma = fixture("puma6r.urdf");
    let args = ["benchmark", "--urdf", &puma, "--type", "hybrid", "--trials", "4", "--seed", "17", "--json"];
    assert_eq!(without_times(json_ok(&args)), without_times(json_ok(&args)));

    let args = ["solve", "--urdf", &puma, "--type", "forward", "--q", "0.1,0.2,0.3,0.4,0.5,0.6", "--tau", "1,2,3,0,0,0", "--ordering", "md"];
    assert_eq!(without_times(json_ok(&args)), without_times(json_ok(&args)));
}

#[test]
fn describe_model() {
    let v = json_ok(&["describe", "--urdf", &fixture("puma6r.urdf")]);
    assert_eq!(v["links"].as_array().unwrap().len(), 7);
    assert_eq!(v["joints"].as_array().unwrap().len(), 6);
}
