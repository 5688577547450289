use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::{loop_residuals, tree_kinematics, JointState, Kinematics, LOOP_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::RobotModel;

const MAX_ITERATIONS: usize = 100;
const STEP: f64 = 1e-7;

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Stacked 6-vector closure errors of every loop joint.
fn pose_error(model: &RobotModel, kin: &Kinematics) -> DVector<f64> {
    let loops: Vec<usize> = (0..model.joints().len()).filter(|k| model.joints()[*k].is_loop()).collect();
    let mut e = DVector::zeros(6 * loops.len());
    for (r, &k) in loops.iter().enumerate() {
        let j = &model.joints()[k];
        let c = kin.poses[j.child].inverse() * kin.poses[j.parent] * kin.transforms[k].inverse();
        e.fixed_rows_mut::<3>(6 * r).copy_from(&vee(c.rotation()));
        e.fixed_rows_mut::<3>(6 * r + 3).copy_from(c.translation());
    }
    e
}

fn twist_error(model: &RobotModel, kin: &Kinematics) -> DVector<f64> {
    let loops: Vec<usize> = (0..model.joints().len()).filter(|k| model.joints()[*k].is_loop()).collect();
    let mut e = DVector::zeros(6 * loops.len());
    for (r, &k) in loops.iter().enumerate() {
        let j = &model.joints()[k];
        let mut v = kin.twists[j.child].to_vector() - kin.transforms[k].adjoint() * kin.twists[j.parent].to_vector();
        if let Some(a) = &j.axis {
            v -= a.as_vector() * kin.rates[k];
        }
        e.rows_mut(6 * r, 6).copy_from(&v);
    }
    e
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(b, 1e-12).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Adjusts the non-driven angles and rates so every loop closes. `driven`
/// lists positions in the movable-joint vector whose values are kept.
pub fn close_loops(model: &RobotModel, state: &JointState, driven: &[usize]) -> Result<JointState> {
    state.check(model)?;
    let n = state.angles.len();
    let free: Vec<usize> = (0..n).filter(|i| !driven.contains(i)).collect();
    let mut s = state.clone();

    let mut err = pose_error(model, &tree_kinematics(model, &s)?);
    for _ in 0..MAX_ITERATIONS {
        if err.amax() < 1e-14 {
            break;
        }
        let mut jac = DMatrix::zeros(err.len(), free.len());
        for (c, &i) in free.iter().enumerate() {
            let mut p = s.clone();
            p.angles[i] += STEP;
            let mut m = s.clone();
            m.angles[i] -= STEP;
            let d = (pose_error(model, &tree_kinematics(model, &p)?) - pose_error(model, &tree_kinematics(model, &m)?)) / (2.0 * STEP);
            jac.set_column(c, &d);
        }
        let delta = least_squares(&jac, &(-&err));
        for (c, &i) in free.iter().enumerate() {
            s.angles[i] += delta[c];
        }
        err = pose_error(model, &tree_kinematics(model, &s)?);
    }

    // the rate residual is linear in the rates
    let mut zero_free = s.clone();
    for &i in &free {
        zero_free.rates[i] = 0.0;
    }
    let base = twist_error(model, &tree_kinematics(model, &zero_free)?);
    let mut jac = DMatrix::zeros(base.len(), free.len());
    for (c, &i) in free.iter().enumerate() {
        let mut unit = zero_free.clone();
        unit.rates[i] = 1.0;
        jac.set_column(c, &(twist_error(model, &tree_kinematics(model, &unit)?) - &base));
    }
    let rates = least_squares(&jac, &(-&base));
    s = zero_free;
    for (c, &i) in free.iter().enumerate() {
        s.rates[i] = rates[c];
    }

    let kin = tree_kinematics(model, &s)?;
    for (k, j) in model.joints().iter().enumerate().filter(|(_, j)| j.is_loop()) {
        let (p, t) = loop_residuals(&kin, model, k);
        if p.max(t) > LOOP_TOLERANCE {
            return Err(Error::InconsistentLoopState {
                joint: j.name.clone(),
                residual: p.max(t),
            });
        }
    }
    Ok(s)
}
