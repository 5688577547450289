//! Transcription of the Newton-Euler constraints at one joint state into a
//! linear factor graph.

mod loops;
mod schemes;
mod solve;

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgraph::{FactorGraph, LinearFactor, VarKey};
use crate::model::{JointKind, RobotModel};
use crate::spatial::{big_adjoint, little_adjoint, Accel, Pose, Twist, Wrench};

pub use loops::close_loops;
pub use schemes::{classic_ordering, ordering_for, Scheme};
pub use solve::{prepare, solve_dynamics, solve_prepared, DynamicsSolution, Prepared, SolveReport};

/// Loop pose and twist residuals above this are rejected.
pub const LOOP_TOLERANCE: f64 = 1e-6;
/// Row scale of the minimum-torque priors.
pub const PRIOR_WEIGHT: f64 = 1e-3;

/// Angles and rates, one entry per movable joint (tree joints, then loop joints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub angles: Vec<f64>,
    pub rates: Vec<f64>,
}

impl JointState {
    pub fn new(angles: Vec<f64>, rates: Vec<f64>) -> Self {
        Self { angles, rates }
    }

    pub fn zeros(model: &RobotModel) -> Self {
        let n = model.movable_joints().len();
        Self::new(vec![0.0; n], vec![0.0; n])
    }

    fn check(&self, model: &RobotModel) -> Result<()> {
        let n = model.movable_joints().len();
        if self.angles.len() != n || self.rates.len() != n {
            return Err(Error::InvalidInput(format!(
                "joint state needs {n} angles and rates, got {} and {}",
                self.angles.len(),
                self.rates.len()
            )));
        }
        if self.angles.iter().chain(&self.rates).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("joint state has non-finite entries".into()));
        }
        Ok(())
    }
}

/// What is given at an actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Designation {
    Accel(f64),
    Torque(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlanarLoop {
    pub joint: String,
    /// Plane normal in the loop joint frame; the joint axis when absent.
    #[serde(default)]
    pub normal: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ProblemSpec {
    /// One entry per actuated joint, in joint order. Unactuated joints carry zero torque.
    pub joints: Vec<Designation>,
    /// (angular; linear) acceleration of the base link.
    pub base_accel: [f64; 6],
    /// (moment; force) exerted by the tool link on its environment, in the tool link body frame.
    pub tool_wrench: [f64; 6],
    pub gravity: [f64; 3],
    pub min_torque_prior: bool,
    pub planar_loops: Vec<PlanarLoop>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            joints: Vec::new(),
            base_accel: [0.0; 6],
            tool_wrench: [0.0; 6],
            gravity: [0.0, 0.0, -9.81],
            min_torque_prior: false,
            planar_loops: Vec::new(),
        }
    }
}

impl ProblemSpec {
    pub fn inverse(qdd: &[f64]) -> Self {
        Self {
            joints: qdd.iter().map(|x| Designation::Accel(*x)).collect(),
            ..Self::default()
        }
    }

    pub fn forward(tau: &[f64]) -> Self {
        Self {
            joints: tau.iter().map(|x| Designation::Torque(*x)).collect(),
            ..Self::default()
        }
    }

    pub fn with_gravity(mut self, gravity: Vector3<f64>) -> Self {
        self.gravity = gravity.into();
        self
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn tool(&self) -> Wrench {
        Wrench::from_vector(&Vector6::from(self.tool_wrench))
    }

    pub fn base(&self) -> Accel {
        Accel::from_vector(&Vector6::from(self.base_accel))
    }
}

/// Known or unknown value of a joint quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Known(f64),
    Unknown,
}

/// Per-joint designations resolved against a model.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRoles {
    /// Indexed by joint vector position; fixed joints have `Known(0)` accel and no torque.
    pub accel: Vec<Slot>,
    pub torque: Vec<Option<Slot>>,
}

impl JointRoles {
    pub fn resolve(model: &RobotModel, spec: &ProblemSpec) -> Result<Self> {
        let actuated = model.actuated_joints();
        if spec.joints.len() != actuated.len() {
            return Err(Error::InvalidInput(format!(
                "problem needs {} joint designations (one per actuated joint), got {}",
                actuated.len(),
                spec.joints.len()
            )));
        }
        let n = model.joints().len();
        let mut accel = vec![Slot::Unknown; n];
        let mut torque = vec![Some(Slot::Known(0.0)); n];
        for (k, j) in model.joints().iter().enumerate() {
            if !j.is_movable() {
                accel[k] = Slot::Known(0.0);
                torque[k] = None;
            }
        }
        for (k, d) in actuated.iter().zip(&spec.joints) {
            if !model.joints()[*k].is_movable() {
                return Err(Error::InvalidInput(format!(
                    "fixed joint `{}` cannot be actuated",
                    model.joints()[*k].name
                )));
            }
            match *d {
                Designation::Accel(x) => {
                    accel[*k] = Slot::Known(x);
                    torque[*k] = Some(Slot::Unknown);
                }
                Designation::Torque(x) => torque[*k] = Some(Slot::Known(x)),
            }
        }
        Ok(Self { accel, torque })
    }

    pub fn torque_unknown(&self, k: usize) -> bool {
        self.torque[k] == Some(Slot::Unknown)
    }

    pub fn accel_unknown(&self, k: usize) -> bool {
        self.accel[k] == Slot::Unknown
    }
}

/// Joint transforms, world poses and twists at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    /// Child-from-parent transform per joint.
    pub transforms: Vec<Pose>,
    /// World-from-body pose per link.
    pub poses: Vec<Pose>,
    pub twists: Vec<Twist>,
    /// Angle and rate per joint (zero for fixed joints).
    pub angles: Vec<f64>,
    pub rates: Vec<f64>,
}

fn per_joint(model: &RobotModel, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.joints().len()];
    for (k, v) in model.movable_joints().into_iter().zip(values) {
        out[k] = *v;
    }
    out
}

/// Twists propagated out from a resting base, with loop closure checks.
pub fn compute_twists(model: &RobotModel, state: &JointState) -> Result<Kinematics> {
    let kin = tree_kinematics(model, state)?;
    for (k, j) in model.joints().iter().enumerate().filter(|(_, j)| j.is_loop()) {
        let (pose_err, twist_err) = loop_residuals(&kin, model, k);
        let residual = pose_err.max(twist_err);
        if residual > LOOP_TOLERANCE {
            return Err(Error::InconsistentLoopState {
                joint: j.name.clone(),
                residual,
            });
        }
    }
    Ok(kin)
}

fn tree_kinematics(model: &RobotModel, state: &JointState) -> Result<Kinematics> {
    state.check(model)?;
    let angles = per_joint(model, &state.angles);
    let rates = per_joint(model, &state.rates);
    let transforms: Vec<Pose> = model
        .joints()
        .iter()
        .zip(&angles)
        .map(|(j, q)| j.transform(*q))
        .collect();
    let n = model.links().len();
    let mut poses = vec![Pose::identity(); n];
    let mut twists = vec![Twist::zero(); n];
    for &k in model.topological_order() {
        let j = &model.joints()[k];
        poses[j.child] = poses[j.parent] * transforms[k].inverse();
        let mut v = transforms[k].adjoint() * twists[j.parent].to_vector();
        if let Some(a) = &j.axis {
            v += a.as_vector() * rates[k];
        }
        twists[j.child] = Twist::from_vector(&v);
    }
    Ok(Kinematics {
        transforms,
        poses,
        twists,
        angles,
        rates,
    })
}

/// Pose and twist closure errors at loop joint `k`.
fn loop_residuals(kin: &Kinematics, model: &RobotModel, k: usize) -> (f64, f64) {
    let j = &model.joints()[k];
    let closure = kin.poses[j.child].inverse() * kin.poses[j.parent] * kin.transforms[k].inverse();
    let pose_err = (closure.to_homogeneous() - nalgebra::Matrix4::identity()).amax();
    let mut r = kin.twists[j.child].to_vector() - kin.transforms[k].adjoint() * kin.twists[j.parent].to_vector();
    if let Some(a) = &j.axis {
        r -= a.as_vector() * kin.rates[k];
    }
    (pose_err, r.amax())
}

fn dm6(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, 6, m.as_slice())
}

fn dv6(v: &Vector6<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// Unary factor zeroing the two in-plane moments and the normal force of a
/// loop wrench. `normal` is expressed in the wrench's frame.
pub fn planar_factor(key: VarKey, normal: &Vector3<f64>) -> Result<LinearFactor> {
    if (normal.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput("plane normal must be a unit vector".into()));
    }
    let n = normal.normalize();
    // basis completion from the coordinate axis least aligned with n
    let pick = (0..3)
        .min_by(|a, b| n[*a].abs().partial_cmp(&n[*b].abs()).unwrap().then(a.cmp(b)))
        .unwrap();
    let seed = Vector3::ith(pick, 1.0);
    let e1 = (seed - n * n.dot(&seed)).normalize();
    let e2 = n.cross(&e1);
    let mut a = DMatrix::zeros(3, 6);
    a.view_mut((0, 0), (1, 3)).copy_from(&e1.transpose());
    a.view_mut((1, 0), (1, 3)).copy_from(&e2.transpose());
    a.view_mut((2, 3), (1, 3)).copy_from(&n.transpose());
    Ok(LinearFactor::new(vec![(key, a)], DVector::zeros(3))?.with_label(format!("planar {key}")))
}

/// Builds the factor graph for `spec` at `state`. Known quantities appear only
/// in right-hand sides (and as factor parameters for display).
pub fn build_graph(model: &RobotModel, state: &JointState, spec: &ProblemSpec) -> Result<FactorGraph> {
    let kin = compute_twists(model, state)?;
    build_graph_with(model, &kin, spec)
}

pub(crate) fn build_graph_with(model: &RobotModel, kin: &Kinematics, spec: &ProblemSpec) -> Result<FactorGraph> {
    let roles = JointRoles::resolve(model, spec)?;
    let gravity = spec.gravity_vector();
    let base_accel = spec.base().to_vector();
    if !gravity.iter().chain(base_accel.iter()).chain(spec.tool_wrench.iter()).all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("gravity, base acceleration and tool wrench must be finite".into()));
    }
    let mut graph = FactorGraph::new();
    let eye = DMatrix::<f64>::identity(6, 6);

    for (k, j) in model.joints().iter().enumerate() {
        let number = k + 1;
        let ad = dm6(&kin.transforms[k].adjoint());
        let mut blocks = Vec::new();
        let mut rhs = DVector::zeros(6);
        let mut params = Vec::new();
        if j.child == 0 {
            rhs -= dv6(&base_accel);
            params.push(VarKey::accel(0));
        } else {
            blocks.push((VarKey::accel(j.child), eye.clone()));
        }
        if j.parent == 0 {
            rhs += &ad * dv6(&base_accel);
            params.push(VarKey::accel(0));
        } else {
            blocks.push((VarKey::accel(j.parent), -&ad));
        }
        if let Some(a) = &j.axis {
            let a6 = dv6(a.as_vector());
            match roles.accel[k] {
                Slot::Unknown => blocks.push((VarKey::joint_accel(number), DMatrix::from_column_slice(6, 1, (-&a6).as_slice()))),
                Slot::Known(x) => {
                    rhs += &a6 * x;
                    params.push(VarKey::joint_accel(number));
                }
            }
            rhs += dm6(&little_adjoint(&kin.twists[j.child])) * &a6 * kin.rates[k];
            params.push(VarKey::angle_rate(number));
        }
        if blocks.is_empty() {
            continue;
        }
        graph.add(
            LinearFactor::new(blocks, rhs)?
                .with_params(params)
                .with_label(format!("accel j{number}")),
        );

        if let (Some(a), Some(slot)) = (&j.axis, roles.torque[k]) {
            let row = DMatrix::from_row_slice(1, 6, a.as_vector().as_slice());
            let mut blocks = vec![(VarKey::wrench(number), row)];
            let (rhs, params) = match slot {
                Slot::Unknown => {
                    blocks.push((VarKey::torque(number), DMatrix::from_element(1, 1, -1.0)));
                    (0.0, vec![])
                }
                Slot::Known(t) => (t, vec![VarKey::torque(number)]),
            };
            graph.add(
                LinearFactor::new(blocks, DVector::from_element(1, rhs))?
                    .with_params(params)
                    .with_label(format!("torque j{number}")),
            );
            if slot == Slot::Unknown && spec.min_torque_prior {
                graph.add(
                    LinearFactor::new(vec![(VarKey::torque(number), DMatrix::identity(1, 1))], DVector::zeros(1))?
                        .with_weight(PRIOR_WEIGHT)
                        .with_label(format!("prior tau{number}")),
                );
            }
        }
    }

    for i in 1..model.links().len() {
        let mut blocks = Vec::new();
        for (k, j) in model.joints().iter().enumerate() {
            if j.parent == i {
                blocks.push((VarKey::wrench(k + 1), dm6(&big_adjoint(&kin.transforms[k]).transpose())));
            }
            if j.child == i {
                blocks.push((VarKey::wrench(k + 1), -&eye));
            }
        }
        let mut rhs = Vector6::zeros();
        let mut params = Vec::new();
        if let Some(inertia) = &model.links()[i].inertia {
            let g = inertia.matrix();
            let v = kin.twists[i].to_vector();
            blocks.push((VarKey::accel(i), dm6(&g)));
            rhs += little_adjoint(&kin.twists[i]).transpose() * g * v;
            let fg = kin.poses[i].rotation().transpose() * gravity * inertia.mass();
            rhs.fixed_rows_mut::<3>(3).add_assign(&fg);
            params.push(VarKey::twist(i));
        }
        if model.tool_link() == Some(i) {
            rhs -= spec.tool().to_vector();
        }
        graph.add(
            LinearFactor::new(blocks, dv6(&rhs))?
                .with_params(params)
                .with_label(format!("wrench l{i}")),
        );
    }

    for planar in &spec.planar_loops {
        let k = model
            .joint_index(&planar.joint)
            .filter(|k| model.joints()[*k].kind == JointKind::LoopRevolute)
            .ok_or_else(|| Error::InvalidInput(format!("`{}` is not a loop joint", planar.joint)))?;
        let j = &model.joints()[k];
        let normal_joint = planar.normal.map(Vector3::from).unwrap_or(j.axis_direction);
        if (normal_joint.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("plane normal for `{}` must be a unit vector", j.name)));
        }
        // joint frame -> child body frame rotation: the screw axis direction
        // is the joint axis rotated the same way
        let rot = joint_frame_rotation(model, k);
        graph.add(planar_factor(VarKey::wrench(k + 1), &(rot * normal_joint))?);
    }
    Ok(graph)
}

/// Rotation taking loop-joint-frame vectors into the child body frame.
fn joint_frame_rotation(model: &RobotModel, k: usize) -> nalgebra::Matrix3<f64> {
    let j = &model.joints()[k];
    // child body frame from joint frame, at the closed rest configuration
    let mut rest_world = vec![Pose::identity(); model.links().len()];
    for &t in model.topological_order() {
        let tj = &model.joints()[t];
        rest_world[tj.child] = rest_world[tj.parent] * tj.rest_offset;
    }
    let joint_world = rest_world[j.parent] * model.body_offset(j.parent).inverse() * j.origin;
    *(rest_world[j.child].inverse() * joint_world).rotation()
}
