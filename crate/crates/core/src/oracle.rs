//! Reference implementations for cross-checking the factor-graph solver.
//!
//! The recursive routines work in world coordinates with 3-vectors and read
//! the raw description data (joint origins, axes, inertial origins), so they
//! share no transcription code with the graph builder.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Unit, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::fgraph::{FactorGraph, Solution, VarKey};
use crate::model::RobotModel;
use crate::transcribe::{JointRoles, JointState, ProblemSpec, Slot};

const DENSE_RANK_TOLERANCE: f64 = 1e-9;

struct Frame {
    rot: Matrix3<f64>,
    pos: Vector3<f64>,
}

impl Frame {
    fn then(&self, rot: &Matrix3<f64>, pos: &Vector3<f64>) -> Frame {
        Frame {
            rot: self.rot * rot,
            pos: self.pos + self.rot * pos,
        }
    }
}

fn serial_only(model: &RobotModel) -> Result<()> {
    if model.has_loops() {
        return Err(Error::UnsupportedTopology(
            "recursive reference algorithms need a tree without loop joints".into(),
        ));
    }
    Ok(())
}

fn per_joint(model: &RobotModel, values: &[f64], what: &str) -> Result<Vec<f64>> {
    let movable = model.movable_joints();
    if values.len() != movable.len() {
        return Err(Error::InvalidInput(format!(
            "{what}: expected {} values, got {}",
            movable.len(),
            values.len()
        )));
    }
    let mut out = vec![0.0; model.joints().len()];
    for (k, v) in movable.into_iter().zip(values) {
        out[k] = *v;
    }
    Ok(out)
}

/// Everything the recursion computes, in body frames at each center of mass.
#[derive(Debug, Clone)]
pub struct NewtonEulerTrace {
    /// One entry per movable joint.
    pub torques: Vec<f64>,
    /// Spatial acceleration (angular; linear) per link, base first.
    pub link_accels: Vec<Vector6<f64>>,
    /// Wrench (moment; force) from parent onto child per joint, in the child body frame.
    pub joint_wrenches: Vec<Vector6<f64>>,
}

/// Inverse dynamics by Newton-Euler recursion. `qdd` and the result have one
/// entry per movable joint. `tool_wrench` is (moment; force) exerted by the
/// tool link at its center of mass, in its body frame.
pub fn rnea_torques(
    model: &RobotModel,
    state: &JointState,
    qdd: &[f64],
    gravity: &Vector3<f64>,
    tool_wrench: &[f64; 6],
) -> Result<Vec<f64>> {
    Ok(newton_euler(model, state, qdd, gravity, tool_wrench)?.torques)
}

pub fn newton_euler(
    model: &RobotModel,
    state: &JointState,
    qdd: &[f64],
    gravity: &Vector3<f64>,
    tool_wrench: &[f64; 6],
) -> Result<NewtonEulerTrace> {
    serial_only(model)?;
    let q = per_joint(model, &state.angles, "angles")?;
    let qd = per_joint(model, &state.rates, "rates")?;
    let qdd = per_joint(model, qdd, "accelerations")?;
    let nl = model.links().len();
    let nj = model.joints().len();

    // link description frames, centers of mass, joint origins and axes in world
    let mut frames: Vec<Frame> = (0..nl)
        .map(|_| Frame {
            rot: Matrix3::identity(),
            pos: Vector3::zeros(),
        })
        .collect();
    let mut joint_pos = vec![Vector3::zeros(); nj];
    let mut joint_axis = vec![Vector3::zeros(); nj];
    let mut omega = vec![Vector3::zeros(); nl];
    let mut alpha = vec![Vector3::zeros(); nl];
    let mut com = vec![Vector3::zeros(); nl];
    let mut com_acc = vec![Vector3::zeros(); nl];
    let mut com_vel = vec![Vector3::zeros(); nl];
    for &k in model.topological_order() {
        let j = &model.joints()[k];
        let (p, c) = (j.parent, j.child);
        let jf = frames[p].then(j.origin.rotation(), j.origin.translation());
        let z = jf.rot * j.axis_direction;
        let spin = if j.is_movable() {
            Rotation3::from_axis_angle(&Unit::new_normalize(j.axis_direction), q[k]).into_inner()
        } else {
            Matrix3::identity()
        };
        frames[c] = Frame {
            rot: jf.rot * spin,
            pos: jf.pos,
        };
        let c_off = model.links()[c].com_offset;
        com[c] = frames[c].pos + frames[c].rot * c_off.translation();
        joint_pos[k] = jf.pos;
        joint_axis[k] = z;

        let (rate, acc) = if j.is_movable() { (qd[k], qdd[k]) } else { (0.0, 0.0) };
        let r_po = jf.pos - com[p];
        let vel_o = com_vel[p] + omega[p].cross(&r_po);
        let acc_o = com_acc[p] + alpha[p].cross(&r_po) + omega[p].cross(&omega[p].cross(&r_po));
        omega[c] = omega[p] + z * rate;
        alpha[c] = alpha[p] + z * acc + omega[p].cross(&z) * rate;
        let r_oc = com[c] - jf.pos;
        com_vel[c] = vel_o + omega[c].cross(&r_oc);
        com_acc[c] = acc_o + alpha[c].cross(&r_oc) + omega[c].cross(&omega[c].cross(&r_oc));
    }

    // force and moment about the center of mass each link needs from outside
    let mut force = vec![Vector3::zeros(); nl];
    let mut moment = vec![Vector3::zeros(); nl];
    for i in 1..nl {
        if let Some(si) = &model.links()[i].inertia {
            let rot = frames[i].rot * model.links()[i].com_offset.rotation();
            let inertia = rot * si.rotational() * rot.transpose();
            force[i] = (com_acc[i] - gravity) * si.mass();
            moment[i] = inertia * alpha[i] + omega[i].cross(&(inertia * omega[i]));
        }
        if model.tool_link() == Some(i) {
            let rot = frames[i].rot * model.links()[i].com_offset.rotation();
            moment[i] += rot * Vector3::new(tool_wrench[0], tool_wrench[1], tool_wrench[2]);
            force[i] += rot * Vector3::new(tool_wrench[3], tool_wrench[4], tool_wrench[5]);
        }
    }

    // accumulate outward-in: joint force and moment about the joint origin
    let mut jf = vec![Vector3::zeros(); nj];
    let mut jm = vec![Vector3::zeros(); nj];
    for &k in model.topological_order().iter().rev() {
        let c = model.joints()[k].child;
        let o = joint_pos[k];
        let mut f = force[c];
        let mut m = moment[c] + (com[c] - o).cross(&force[c]);
        for (kk, jj) in model.joints().iter().enumerate() {
            if jj.parent == c {
                f += jf[kk];
                m += jm[kk] + (joint_pos[kk] - o).cross(&jf[kk]);
            }
        }
        jf[k] = f;
        jm[k] = m;
    }
    let body_rot = |i: usize| frames[i].rot * model.links()[i].com_offset.rotation();
    let stack = |a: Vector3<f64>, b: Vector3<f64>| Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z);
    let link_accels = (0..nl)
        .map(|i| {
            if i == 0 {
                return Vector6::zeros();
            }
            let rt = body_rot(i).transpose();
            let w = rt * omega[i];
            stack(rt * alpha[i], rt * com_acc[i] - w.cross(&(rt * com_vel[i])))
        })
        .collect();
    let joint_wrenches = (0..nj)
        .map(|k| {
            let c = model.joints()[k].child;
            let rt = body_rot(c).transpose();
            stack(rt * (jm[k] + (joint_pos[k] - com[c]).cross(&jf[k])), rt * jf[k])
        })
        .collect();
    Ok(NewtonEulerTrace {
        torques: model
            .movable_joints()
            .into_iter()
            .map(|k| joint_axis[k].dot(&jm[k]))
            .collect(),
        link_accels,
        joint_wrenches,
    })
}

/// Joint-space inertia matrix by unit-acceleration inverse dynamics.
pub fn mass_matrix(model: &RobotModel, state: &JointState) -> Result<DMatrix<f64>> {
    serial_only(model)?;
    let n = model.movable_joints().len();
    let still = JointState::new(state.angles.clone(), vec![0.0; n]);
    let zero = Vector3::zeros();
    let none = [0.0; 6];
    let base = rnea_torques(model, &still, &vec![0.0; n], &zero, &none)?;
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let tau = rnea_torques(model, &still, &e, &zero, &none)?;
        for r in 0..n {
            m[(r, c)] = tau[r] - base[r];
        }
    }
    Ok(m)
}

/// Forward dynamics: solves `M q̈ = τ − bias`.
pub fn forward_accel(
    model: &RobotModel,
    state: &JointState,
    tau: &[f64],
    gravity: &Vector3<f64>,
    tool_wrench: &[f64; 6],
) -> Result<Vec<f64>> {
    serial_only(model)?;
    let n = model.movable_joints().len();
    if tau.len() != n {
        return Err(Error::InvalidInput(format!("expected {n} torques, got {}", tau.len())));
    }
    let bias = rnea_torques(model, state, &vec![0.0; n], gravity, tool_wrench)?;
    let m = mass_matrix(model, state)?;
    let rhs = DVector::from_iterator(n, tau.iter().zip(&bias).map(|(t, b)| t - b));
    let chol = m.cholesky().ok_or(Error::SingularMass)?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Hybrid dynamics in three passes: zero-acceleration torques, forward
/// dynamics of the torque-given joints, then full inverse dynamics. Returns
/// `(torques, accels)`, one entry per movable joint.
pub fn hybrid_three_pass(model: &RobotModel, state: &JointState, spec: &ProblemSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    serial_only(model)?;
    let roles = JointRoles::resolve(model, spec)?;
    let movable = model.movable_joints();
    let n = movable.len();
    let gravity = spec.gravity_vector();
    if spec.base_accel.iter().any(|x| *x != 0.0) {
        return Err(Error::InvalidInput("reference hybrid dynamics assumes a resting base".into()));
    }
    let mut qdd = vec![0.0; n];
    let mut given_tau = vec![None; n];
    let mut forward = Vec::new();
    for (i, k) in movable.iter().enumerate() {
        match roles.accel[*k] {
            Slot::Known(x) => qdd[i] = x,
            Slot::Unknown => {
                forward.push(i);
                given_tau[i] = match roles.torque[*k] {
                    Some(Slot::Known(t)) => Some(t),
                    _ => None,
                };
            }
        }
    }

    // pass 1: torques with the forward joints held at zero acceleration
    let tau0 = rnea_torques(model, state, &qdd, &gravity, &spec.tool_wrench)?;
    // pass 2: accelerations of the forward joints
    if !forward.is_empty() {
        let m = mass_matrix(model, state)?;
        let nb = forward.len();
        let mbb = DMatrix::from_fn(nb, nb, |r, c| m[(forward[r], forward[c])]);
        let rhs = DVector::from_fn(nb, |r, _| given_tau[forward[r]].unwrap_or(0.0) - tau0[forward[r]]);
        let x = mbb.cholesky().ok_or(Error::SingularMass)?.solve(&rhs);
        for (r, i) in forward.iter().enumerate() {
            qdd[*i] = x[r];
        }
    }
    // pass 3: torques everywhere
    let tau = rnea_torques(model, state, &qdd, &gravity, &spec.tool_wrench)?;
    Ok((tau, qdd))
}

/// Weighted least squares over all factor rows by SVD; ground truth for the
/// eliminator.
pub fn dense_solve(graph: &FactorGraph) -> Result<Solution> {
    let keys: Vec<VarKey> = graph.keys().copied().collect();
    let mut offsets = Vec::with_capacity(keys.len());
    let mut cols = 0;
    for k in &keys {
        offsets.push(cols);
        cols += k.dim();
    }
    let rows = graph.rows();
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    let mut r0 = 0;
    for f in graph.factors() {
        let w = f.weight();
        for (key, block) in f.blocks() {
            let c0 = offsets[keys.binary_search(key).expect("factor key registered in graph")];
            a.view_mut((r0, c0), block.shape()).copy_from(&(block * w));
        }
        b.rows_mut(r0, f.rows()).copy_from(&(f.rhs() * w));
        r0 += f.rows();
    }
    if cols == 0 {
        return Ok(Solution::new());
    }
    if rows < cols {
        return Err(Error::RankDeficient(keys[keys.len() - 1]));
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.argmin();
    let smax = sv.max();
    if smin <= DENSE_RANK_TOLERANCE * smax {
        let v_t = svd.v_t.as_ref().unwrap();
        let null = v_t.row(imin);
        let mut best = (0usize, -1.0f64);
        for (ki, k) in keys.iter().enumerate() {
            let mag = null.columns(offsets[ki], k.dim()).norm();
            if mag > best.1 + 1e-12 {
                best = (ki, mag);
            }
        }
        return Err(Error::RankDeficient(keys[best.0]));
    }
    let solve = |rhs: &DVector<f64>| {
        svd.solve(rhs, 0.0)
            .map_err(|e| Error::GraphError(format!("dense solve failed: {e}")))
    };
    let mut x = solve(&b)?;
    // one refinement step against the residual
    x += solve(&(&b - &a * &x))?;
    Ok(keys
        .iter()
        .zip(&offsets)
        .map(|(k, o)| (*k, x.rows(*o, k.dim()).into_owned()))
        .collect())
}
