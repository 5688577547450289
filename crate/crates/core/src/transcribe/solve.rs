use super::{build_graph_with, compute_twists, ordering_for, JointRoles, JointState, Kinematics, ProblemSpec, Scheme, Slot};
use crate::error::{Error, Result};
use crate::fgraph::{back_substitute, eliminate, EliminationDag, FactorGraph, Solution, VarKey};
use crate::model::RobotModel;
use crate::spatial::{Accel, Twist, Wrench};

/// Joint and link quantities after a solve, known values included.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSolution {
    /// Per movable joint.
    pub torques: Vec<f64>,
    /// Per movable joint.
    pub accels: Vec<f64>,
    /// Per link, base first.
    pub twists: Vec<Twist>,
    /// Per joint.
    pub wrenches: Vec<Wrench>,
    /// Per link, base first.
    pub link_accels: Vec<Accel>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub graph: FactorGraph,
    pub dag: EliminationDag,
    pub raw: Solution,
    pub solution: DynamicsSolution,
    /// Largest hard-factor residual at the solution.
    pub residual_max: f64,
}

fn lookup(raw: &Solution, key: VarKey) -> Result<f64> {
    raw.scalar(&key)
        .ok_or_else(|| Error::GraphError(format!("solution is missing {key}")))
}

pub(crate) fn extract(model: &RobotModel, kin: &Kinematics, spec: &ProblemSpec, raw: &Solution) -> Result<DynamicsSolution> {
    let roles = JointRoles::resolve(model, spec)?;
    let mut torques = Vec::new();
    let mut accels = Vec::new();
    for k in model.movable_joints() {
        let n = k + 1;
        accels.push(match roles.accel[k] {
            Slot::Known(x) => x,
            Slot::Unknown => lookup(raw, VarKey::joint_accel(n))?,
        });
        torques.push(match roles.torque[k] {
            Some(Slot::Known(x)) => x,
            Some(Slot::Unknown) => lookup(raw, VarKey::torque(n))?,
            None => 0.0,
        });
    }
    let wrenches = (1..=model.joints().len())
        .map(|n| raw.get(&VarKey::wrench(n)).map(|v| Wrench::from_vector(&v.fixed_rows::<6>(0).into())))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::GraphError("solution is missing a joint wrench".into()))?;
    let mut link_accels = vec![spec.base()];
    for i in 1..model.links().len() {
        let v = raw
            .get(&VarKey::accel(i))
            .ok_or_else(|| Error::GraphError(format!("solution is missing {}", VarKey::accel(i))))?;
        link_accels.push(Accel::from_vector(&v.fixed_rows::<6>(0).into()));
    }
    Ok(DynamicsSolution {
        torques,
        accels,
        twists: kin.twists.clone(),
        wrenches,
        link_accels,
    })
}

/// Kinematics and factor graph for one problem, before any ordering is chosen.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kinematics: Kinematics,
    pub graph: FactorGraph,
}

pub fn prepare(model: &RobotModel, state: &JointState, spec: &ProblemSpec) -> Result<Prepared> {
    let kinematics = compute_twists(model, state)?;
    let graph = build_graph_with(model, &kinematics, spec)?;
    Ok(Prepared { kinematics, graph })
}

/// Orders, eliminates, back-substitutes and refines a prepared problem.
pub fn solve_prepared(model: &RobotModel, prepared: Prepared, spec: &ProblemSpec, scheme: &Scheme) -> Result<SolveReport> {
    let Prepared { kinematics, graph } = prepared;
    let ordering = ordering_for(&graph, model, spec, scheme)?;
    let dag = eliminate(&graph, &ordering)?;
    let raw = dag.refine(&graph, &back_substitute(&dag));
    let solution = extract(model, &kinematics, spec, &raw)?;
    let residual_max = graph.max_hard_residual(&raw);
    Ok(SolveReport {
        graph,
        dag,
        raw,
        solution,
        residual_max,
    })
}

pub fn solve_dynamics(model: &RobotModel, state: &JointState, spec: &ProblemSpec, scheme: &Scheme) -> Result<SolveReport> {
    solve_prepared(model, prepare(model, state, spec)?, spec, scheme)
}
