//! Acceptance checks, one PASS/FAIL line each.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use fgdyn::fgraph::VarKey;
use fgdyn::fixtures::{self, PENDULUM_LENGTH, PENDULUM_MASS};
use fgdyn::model::{parse_urdf, RobotModel};
use fgdyn::oracle::{dense_solve, forward_accel, hybrid_three_pass, rnea_torques};
use fgdyn::transcribe::{
    build_graph, close_loops, solve_dynamics, Designation, JointState, PlanarLoop, ProblemSpec, Scheme,
};
use fgdyn::Error;
use fgdyn_cli::{run, Cli};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn model(text: &str) -> RobotModel {
    parse_urdf(text).expect("fixture parses")
}

fn random_state(m: &RobotModel, rng: &mut ChaCha8Rng) -> JointState {
    let n = m.movable_joints().len();
    JointState::new(
        (0..n).map(|_| rng.random_range(-PI..PI)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn within(err: f64, tol: f64, detail: String) -> Check {
    if err <= tol {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn oracle_inverse() -> Check {
    let m = model(fixtures::PUMA_6R);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_state(&m, &mut rng);
        let qdd = random_vec(6, &mut rng);
        let spec = ProblemSpec::inverse(&qdd);
        let r = solve_dynamics(&m, &s, &spec, &Scheme::Rnea).map_err(e)?;
        let expected = rnea_torques(&m, &s, &qdd, &spec.gravity_vector(), &spec.tool_wrench).map_err(e)?;
        worst = worst.max(max_diff(&r.solution.torques, &expected));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max |dtau| {worst:.1e} over 100 states in {secs:.2} s");
    if secs >= 5.0 {
        return Err(detail);
    }
    within(worst, 1e-9, detail)
}

fn oracle_forward() -> Check {
    let m = model(fixtures::PUMA_6R);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_state(&m, &mut rng);
        let tau = random_vec(6, &mut rng);
        let spec = ProblemSpec::forward(&tau);
        let r = solve_dynamics(&m, &s, &spec, &Scheme::Aba).map_err(e)?;
        let expected = forward_accel(&m, &s, &tau, &spec.gravity_vector(), &spec.tool_wrench).map_err(e)?;
        worst = worst.max(max_diff(&r.solution.accels, &expected));
    }
    within(worst, 1e-8, format!("max |dqdd| {worst:.1e} over 100 states"))
}

fn round_trip() -> Check {
    let m = model(fixtures::PUMA_6R);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_state(&m, &mut rng);
        let qdd = random_vec(6, &mut rng);
        let tau = solve_dynamics(&m, &s, &ProblemSpec::inverse(&qdd), &Scheme::Rnea).map_err(e)?.solution.torques;
        let back = solve_dynamics(&m, &s, &ProblemSpec::forward(&tau), &Scheme::Aba).map_err(e)?.solution.accels;
        worst = worst.max(max_diff(&back, &qdd));
    }
    within(worst, 1e-9, format!("max |dqdd| {worst:.1e} over 100 states"))
}

fn ordering_invariance() -> Check {
    let m = model(fixtures::PUMA_6R);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inverse = [Scheme::Rnea, Scheme::MinDegree, Scheme::NestedDissection];
    let forward = [Scheme::Crba, Scheme::Aba, Scheme::MinDegree, Scheme::NestedDissection];
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s = random_state(&m, &mut rng);
        let problems = [
            (ProblemSpec::inverse(&random_vec(6, &mut rng)), &inverse[..]),
            (ProblemSpec::forward(&random_vec(6, &mut rng)), &forward[..]),
        ];
        for (spec, schemes) in problems {
            let reference = solve_dynamics(&m, &s, &spec, &schemes[0]).map_err(e)?.raw;
            for scheme in &schemes[1..] {
                let raw = solve_dynamics(&m, &s, &spec, scheme).map_err(e)?.raw;
                worst = worst.max(raw.max_abs_diff(&reference));
            }
        }
    }
    within(
        worst,
        1e-10,
        format!("max difference {worst:.1e} over 20 states (inverse: rnea/md/nd, forward: crba/aba/md/nd)"),
    )
}

fn dag_structure() -> Check {
    let m = model(fixtures::THREE_R);
    let s = JointState::new(vec![0.4, -0.7, 1.1], vec![0.3, -0.2, 0.5]);
    let r = solve_dynamics(&m, &s, &ProblemSpec::inverse(&[0.2, -0.1, 0.3]), &Scheme::Rnea).map_err(e)?;
    let got: BTreeSet<(VarKey, VarKey)> = r.dag.edges().into_iter().collect();
    let mut expected = BTreeSet::new();
    for i in 1..=3 {
        expected.insert((VarKey::torque(i), VarKey::wrench(i)));
        expected.insert((VarKey::wrench(i), VarKey::accel(i)));
        if i < 3 {
            expected.insert((VarKey::wrench(i), VarKey::wrench(i + 1)));
        }
        if i > 1 {
            expected.insert((VarKey::accel(i), VarKey::accel(i - 1)));
        }
    }
    let detail = format!("{} edges, fill-in {}", got.len(), r.dag.fill_in());
    if got == expected {
        Ok(detail)
    } else {
        Err(format!("{detail}; got {got:?}"))
    }
}

fn fill_in_comparison() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, text) in [("3R", fixtures::THREE_R), ("6R", fixtures::PUMA_6R)] {
        let m = model(text);
        let n = m.actuated_joints().len();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_state(&m, &mut rng);
        let spec = ProblemSpec::forward(&random_vec(n, &mut rng));
        let aba = solve_dynamics(&m, &s, &spec, &Scheme::Aba).map_err(e)?.dag.edge_count();
        let crba = solve_dynamics(&m, &s, &spec, &Scheme::Crba).map_err(e)?.dag.edge_count();
        ok &= aba < crba;
        parts.push(format!("{name}: aba {aba} < crba {crba}"));
    }
    let detail = parts.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hybrid_equivalence() -> Check {
    let m = model(fixtures::THREE_R);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = random_state(&m, &mut rng);
        let v = random_vec(3, &mut rng);
        let spec = ProblemSpec {
            joints: vec![Designation::Accel(v[0]), Designation::Torque(v[1]), Designation::Torque(v[2])],
            ..ProblemSpec::default()
        };
        let r = solve_dynamics(&m, &s, &spec, &Scheme::MinDegree).map_err(e)?;
        let (tau, qdd) = hybrid_three_pass(&m, &s, &spec).map_err(e)?;
        worst = worst.max(max_diff(&r.solution.torques, &tau)).max(max_diff(&r.solution.accels, &qdd));
    }
    within(worst, 1e-9, format!("max difference {worst:.1e} over 50 states"))
}

fn planar(spec: ProblemSpec) -> ProblemSpec {
    ProblemSpec {
        planar_loops: vec![PlanarLoop {
            joint: "j5".into(),
            normal: None,
        }],
        ..spec
    }
}

fn closed_loop() -> Check {
    let m = model(fixtures::FIVE_BAR);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut residual, mut torque_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let mut s = JointState::zeros(&m);
        for i in 0..2 {
            s.angles[i] = rng.random_range(-0.3..0.3);
            s.rates[i] = rng.random_range(-1.0..1.0);
        }
        let s = close_loops(&m, &s, &[0, 1]).map_err(e)?;
        let forward = ProblemSpec::forward(&random_vec(2, &mut rng));

        // (a) no planar factor: the loop wrench is underdetermined
        match solve_dynamics(&m, &s, &forward, &Scheme::Aba) {
            Err(Error::RankDeficient(k)) if k == VarKey::wrench(5) => {}
            other => return Err(format!("(a) expected RankDeficient(F5), got {:?}", other.map(|r| r.residual_max))),
        }
        // (b) with it
        residual = residual.max(solve_dynamics(&m, &s, &planar(forward), &Scheme::Aba).map_err(e)?.residual_max);
        // (c) both cranks actuated, torque priors, against dense least squares
        let spec = ProblemSpec {
            min_torque_prior: true,
            ..planar(ProblemSpec::inverse(&random_vec(2, &mut rng)))
        };
        let r = solve_dynamics(&m, &s, &spec, &Scheme::MinDegree).map_err(e)?;
        let dense = dense_solve(&build_graph(&m, &s, &spec).map_err(e)?).map_err(e)?;
        for n in [1, 2] {
            let k = VarKey::torque(n);
            torque_gap = torque_gap.max((r.raw.scalar(&k).unwrap_or(f64::NAN) - dense.scalar(&k).unwrap_or(f64::NAN)).abs());
        }
    }
    let detail = format!("(a) F5 rank deficient, (b) residual {residual:.1e}, (c) torque gap {torque_gap:.1e}; 10 states");
    if residual < 1e-8 && torque_gap <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn static_gravity() -> Check {
    let m = model(fixtures::PENDULUM);
    let mut worst: f64 = 0.0;
    for theta in [0.0, PI / 6.0, PI / 2.0, PI] {
        let s = JointState::new(vec![theta], vec![0.0]);
        let r = solve_dynamics(&m, &s, &ProblemSpec::inverse(&[0.0]), &Scheme::Rnea).map_err(e)?;
        let expected = PENDULUM_MASS * 9.81 * PENDULUM_LENGTH * theta.cos();
        worst = worst.max((r.solution.torques[0] - expected).abs());
    }
    within(worst, 1e-10, format!("max |tau - m g l cos(theta)| {worst:.1e}"))
}

fn benchmark(kind: &str, orderings: &str) -> Result<Value, String> {
    let urdf = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/puma6r.urdf");
    let urdf = urdf.to_string_lossy();
    let args = [
        "fgdyn", "benchmark", "--urdf", &urdf, "--type", kind, "--orderings", orderings, "--trials", "1000", "--seed", "10",
        "--json",
    ];
    let cli = Cli::try_parse_from(args).map_err(e)?;
    let mut out = Vec::new();
    run(&cli, &mut out).map_err(e)?;
    serde_json::from_slice(&out).map_err(e)
}

fn performance() -> Check {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, orderings) in [("inverse", "rnea,md,nd"), ("forward", "aba,md,nd")] {
        let v = benchmark(kind, orderings)?;
        let rows = v["rows"].as_array().ok_or("benchmark JSON has no rows")?;
        for r in rows {
            println!(
                "      {kind:<8} {:<4} mean {:>9.1} us  median {:>9.1} us  edges {:>3}",
                r["ordering"].as_str().unwrap_or("?"),
                r["meanMicros"].as_f64().unwrap_or(f64::NAN),
                r["medianMicros"].as_f64().unwrap_or(f64::NAN),
                r["edgeCount"]
            );
        }
        let edges: Vec<u64> = rows.iter().map(|r| r["edgeCount"].as_u64().unwrap_or(u64::MAX)).collect();
        let classic = edges[0] as f64;
        for (name, count) in [("md", edges[1]), ("nd", edges[2])] {
            ok &= count as f64 <= classic * 1.1;
            parts.push(format!("{kind} {name} {count} vs {}", edges[0]));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    let detail = format!("{}; 2x1000 trials in {secs:.1} s", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 10] = [
        ("oracle equivalence (inverse)", oracle_inverse),
        ("oracle equivalence (forward)", oracle_forward),
        ("round trip", round_trip),
        ("ordering invariance", ordering_invariance),
        ("DAG structure", dag_structure),
        ("fill-in comparison", fill_in_comparison),
        ("hybrid equivalence", hybrid_equivalence),
        ("closed loop", closed_loop),
        ("static gravity", static_gravity),
        ("performance sanity", performance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
