//! Command-line front end: `solve`, `benchmark`, `export` and `describe`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgdyn::fgraph::{dag_to_dot, eliminate, graph_to_dot};
use fgdyn::model::{parse_urdf, RobotModel};
use fgdyn::transcribe::{
    close_loops, ordering_for, prepare, solve_prepared, Designation, JointState, PlanarLoop, ProblemSpec, Scheme,
    SolveReport,
};
use serde_json::{json, Value};

mod bench;

pub use bench::{run_benchmark, BenchRow, Benchmark};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] fgdyn::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 for errors in the problem or model, 2 for file and stream errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Model(fgdyn::Error::InvalidInput(msg.into()))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes command output; a reader that went away early is not an error.
pub(crate) fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "fgdyn", version, about = "Manipulator dynamics by factor-graph elimination")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one dynamics problem and print the result as JSON.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// rnea, crba, aba, md, nd or custom:<key,key,...>
        #[arg(long)]
        ordering: Option<String>,
    },
    /// Time orderings over random states.
    Benchmark(BenchArgs),
    /// Write the factor graph or elimination DAG as Graphviz DOT.
    Export {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value = "graph")]
        what: ExportWhat,
        #[arg(long)]
        ordering: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the parsed robot model as JSON.
    Describe {
        #[arg(long)]
        urdf: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemType {
    Inverse,
    Forward,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportWhat {
    Graph,
    Dag,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub urdf: PathBuf,
    #[arg(long = "type", value_enum)]
    pub kind: ProblemType,
    /// Joint angles, comma separated, in joint declaration order (default zeros).
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Joint rates (default zeros).
    #[arg(long, allow_hyphen_values = true)]
    pub qd: Option<String>,
    /// Accelerations of the actuated joints, for inverse problems.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["tau", "mixed"])]
    pub qdd: Option<String>,
    /// Torques of the actuated joints, for forward problems.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "mixed")]
    pub tau: Option<String>,
    /// JSON problem spec, or a JSON array of {"accel": x} / {"torque": x}.
    #[arg(long)]
    pub mixed: Option<String>,
    /// "gx gy gz" (default "0 0 -9.81").
    #[arg(long, allow_hyphen_values = true)]
    pub gravity: Option<String>,
    /// Wrench the tool link exerts on its surroundings: 6 values, moment first.
    #[arg(long, allow_hyphen_values = true)]
    pub tool_wrench: Option<String>,
    /// <joint>[:<nx ny nz>], repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub planar_loop: Vec<String>,
    #[arg(long)]
    pub min_torque_prior: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub urdf: PathBuf,
    #[arg(long = "type", value_enum)]
    pub kind: ProblemType,
    /// Comma-separated orderings (default depends on --type).
    #[arg(long)]
    pub orderings: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub planar_loop: Vec<String>,
    #[arg(long)]
    pub json: bool,
}

pub fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| invalid(format!("`{t}` is not a number"))))
        .collect()
}

fn parse_fixed<const N: usize>(text: &str, what: &str) -> CliResult<[f64; N]> {
    let v = parse_list(text)?;
    v.try_into()
        .map_err(|v: Vec<f64>| invalid(format!("{what} needs {N} values, got {}", v.len())))
}

pub fn parse_planar(text: &str) -> CliResult<PlanarLoop> {
    let (joint, normal) = match text.split_once(':') {
        Some((j, n)) => (j, Some(parse_fixed::<3>(n, "planar-loop normal")?)),
        None => (text, None),
    };
    if joint.trim().is_empty() {
        return Err(invalid("planar-loop needs a joint name"));
    }
    Ok(PlanarLoop {
        joint: joint.trim().to_string(),
        normal,
    })
}

pub fn load_model(path: &Path) -> CliResult<RobotModel> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(parse_urdf(&text)?)
}

/// Joint state from CSV lists. For models with loop joints the lists may
/// cover only the tree joints; the unactuated values are then adjusted so
/// every loop closes, keeping the actuated ones.
pub fn joint_state(model: &RobotModel, q: Option<&str>, qd: Option<&str>) -> CliResult<JointState> {
    let movable = model.movable_joints();
    let tree = movable.iter().filter(|k| !model.joints()[**k].is_loop()).count();
    let read = |text: Option<&str>, what: &str| -> CliResult<(Vec<f64>, bool)> {
        let mut v = match text {
            Some(t) => parse_list(t)?,
            None => vec![0.0; tree],
        };
        let complete = v.len() == movable.len();
        if v.len() == tree {
            v.resize(movable.len(), 0.0);
        } else if !complete {
            return Err(invalid(format!(
                "{what} needs {} values (one per movable joint), got {}",
                movable.len(),
                v.len()
            )));
        }
        Ok((v, complete))
    };
    let (angles, full_q) = read(q, "--q")?;
    let (rates, full_qd) = read(qd, "--qd")?;
    let state = JointState::new(angles, rates);
    if model.has_loops() && !(full_q && full_qd) {
        let driven: Vec<usize> = (0..movable.len()).filter(|i| model.joints()[movable[*i]].actuated).collect();
        return Ok(close_loops(model, &state, &driven)?);
    }
    Ok(state)
}

pub fn problem_spec(model: &RobotModel, args: &ProblemArgs) -> CliResult<ProblemSpec> {
    let n = model.actuated_joints().len();
    let mut spec = match (args.kind, &args.qdd, &args.tau, &args.mixed) {
        (ProblemType::Inverse, Some(qdd), None, None) => ProblemSpec::inverse(&parse_list(qdd)?),
        (ProblemType::Forward, None, Some(tau), None) => ProblemSpec::forward(&parse_list(tau)?),
        (ProblemType::Hybrid, None, None, Some(mixed)) => {
            let value: Value =
                serde_json::from_str(mixed).map_err(|e| invalid(format!("--mixed is not valid JSON: {e}")))?;
            if value.is_array() {
                let joints: Vec<Designation> =
                    serde_json::from_value(value).map_err(|e| invalid(format!("--mixed: {e}")))?;
                ProblemSpec {
                    joints,
                    ..ProblemSpec::default()
                }
            } else {
                serde_json::from_value(value).map_err(|e| invalid(format!("--mixed: {e}")))?
            }
        }
        (ProblemType::Inverse, ..) => return Err(invalid("--type inverse takes --qdd")),
        (ProblemType::Forward, ..) => return Err(invalid("--type forward takes --tau")),
        (ProblemType::Hybrid, ..) => return Err(invalid("--type hybrid takes --mixed")),
    };
    if spec.joints.len() != n {
        return Err(invalid(format!(
            "expected {n} values (one per actuated joint), got {}",
            spec.joints.len()
        )));
    }
    if let Some(g) = &args.gravity {
        spec.gravity = parse_fixed::<3>(g, "--gravity")?;
    }
    if let Some(w) = &args.tool_wrench {
        spec.tool_wrench = parse_fixed::<6>(w, "--tool-wrench")?;
    }
    for p in &args.planar_loop {
        spec.planar_loops.push(parse_planar(p)?);
    }
    spec.min_torque_prior |= args.min_torque_prior;
    Ok(spec)
}

/// Ordering used when none is given: the classical algorithm for the problem
/// type, or minimum degree when that algorithm does not apply.
pub fn default_scheme(kind: ProblemType) -> Scheme {
    match kind {
        ProblemType::Inverse => Scheme::Rnea,
        ProblemType::Forward => Scheme::Aba,
        ProblemType::Hybrid => Scheme::MinDegree,
    }
}

fn resolve_scheme(
    ordering: Option<&str>,
    kind: ProblemType,
    model: &RobotModel,
    spec: &ProblemSpec,
    graph: &fgdyn::fgraph::FactorGraph,
) -> CliResult<Scheme> {
    if let Some(text) = ordering {
        return Ok(text.parse()?);
    }
    let scheme = default_scheme(kind);
    match ordering_for(graph, model, spec, &scheme) {
        Err(fgdyn::Error::IncompatibleScheme { .. }) => Ok(Scheme::MinDegree),
        _ => Ok(scheme),
    }
}

fn vectors<T>(items: &[T], f: impl Fn(&T) -> Vec<f64>) -> Value {
    Value::Array(items.iter().map(|x| json!(f(x))).collect())
}

pub fn solve_json(report: &SolveReport, elapsed_us: f64, build_us: f64) -> Value {
    let s = &report.solution;
    json!({
        "solution": {
            "torques": s.torques,
            "accels": s.accels,
            "twists": vectors(&s.twists, |t| t.to_vector().as_slice().to_vec()),
            "wrenches": vectors(&s.wrenches, |w| w.to_vector().as_slice().to_vec()),
            "linkAccels": vectors(&s.link_accels, |a| a.to_vector().as_slice().to_vec()),
        },
        "ordering": report.dag.ordering().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "fillIn": report.dag.fill_in(),
        "edgeCount": report.dag.edge_count(),
        "residualMax": report.residual_max,
        "elapsedMicros": elapsed_us,
        "buildMicros": build_us,
    })
}

fn micros(start: Instant) -> f64 {
    start.elapsed().as_nanos() as f64 / 1000.0
}

pub fn cmd_solve(problem: &ProblemArgs, ordering: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&problem.urdf)?;
    let state = joint_state(&model, problem.q.as_deref(), problem.qd.as_deref())?;
    let spec = problem_spec(&model, problem)?;

    let start = Instant::now();
    let prepared = prepare(&model, &state, &spec)?;
    let build_us = micros(start);
    let scheme = resolve_scheme(ordering, problem.kind, &model, &spec, &prepared.graph)?;
    let start = Instant::now();
    let report = solve_prepared(&model, prepared, &spec, &scheme)?;
    let elapsed_us = micros(start);

    let text = serde_json::to_string_pretty(&solve_json(&report, elapsed_us, build_us)).expect("JSON values serialize");
    emit(out, &(text + "\n"))
}

pub fn cmd_export(problem: &ProblemArgs, what: ExportWhat, ordering: Option<&str>, path: &Path) -> CliResult<()> {
    let model = load_model(&problem.urdf)?;
    let state = joint_state(&model, problem.q.as_deref(), problem.qd.as_deref())?;
    let spec = problem_spec(&model, problem)?;
    let graph = prepare(&model, &state, &spec)?.graph;
    let dot = match what {
        ExportWhat::Graph => graph_to_dot(&graph),
        ExportWhat::Dag => {
            let scheme = resolve_scheme(ordering, problem.kind, &model, &spec, &graph)?;
            let order = ordering_for(&graph, &model, &spec, &scheme)?;
            dag_to_dot(&eliminate(&graph, &order)?)
        }
    };
    std::fs::write(path, dot).map_err(|e| io_error(path, e))
}

pub fn cmd_describe(urdf: &Path, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(urdf)?;
    let text = serde_json::to_string_pretty(&model.to_json()).expect("JSON values serialize");
    emit(out, &(text + "\n"))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Solve { problem, ordering } => cmd_solve(problem, ordering.as_deref(), out),
        Command::Benchmark(args) => bench::cmd_benchmark(args, out),
        Command::Export {
            problem,
            what,
            ordering,
            out: path,
        } => cmd_export(problem, *what, ordering.as_deref(), path),
        Command::Describe { urdf } => cmd_describe(urdf, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("1, -2.5 3").unwrap(), [1.0, -2.5, 3.0]);
        assert!(parse_list("").unwrap().is_empty());
        assert!(parse_list("1,x").is_err());
        assert_eq!(parse_fixed::<3>("0 0 -9.81", "g").unwrap(), [0.0, 0.0, -9.81]);
        assert!(parse_fixed::<3>("0 0", "g").is_err());
    }

    #[test]
    fn planar_flag() {
        let p = parse_planar("j5:0 1 0").unwrap();
        assert_eq!(p.joint, "j5");
        assert_eq!(p.normal, Some([0.0, 1.0, 0.0]));
        assert_eq!(parse_planar("j5").unwrap().normal, None);
        assert!(parse_planar(":0 0 1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(invalid("x").exit_code(), 1);
        assert_eq!(CliError::Io("x".into()).exit_code(), 2);
    }

    #[test]
    fn five_bar_state_from_tree_values() {
        let m = parse_urdf(fgdyn::fixtures::FIVE_BAR).unwrap();
        let s = joint_state(&m, Some("0.1,-0.1,0,0"), Some("0.5,0.2,0,0")).unwrap();
        assert_eq!(s.angles.len(), 5);
        assert_eq!(s.angles[0], 0.1);
        assert_eq!(s.rates[1], 0.2);
        assert!(fgdyn::transcribe::compute_twists(&m, &s).is_ok());
    }
}
