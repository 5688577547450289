use std::fmt;
use std::str::FromStr;

use super::{JointRoles, ProblemSpec};
use crate::error::{Error, Result};
use crate::fgraph::{min_degree_ordering, nested_dissection_ordering, FactorGraph, VarKey};
use crate::model::RobotModel;

/// Elimination ordering choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheme {
    Rnea,
    Crba,
    Aba,
    MinDegree,
    NestedDissection,
    Custom(Vec<VarKey>),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Rnea => f.write_str("rnea"),
            Scheme::Crba => f.write_str("crba"),
            Scheme::Aba => f.write_str("aba"),
            Scheme::MinDegree => f.write_str("md"),
            Scheme::NestedDissection => f.write_str("nd"),
            Scheme::Custom(keys) => {
                let keys: Vec<String> = keys.iter().map(ToString::to_string).collect();
                write!(f, "custom:{}", keys.join(","))
            }
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rnea" => Ok(Scheme::Rnea),
            "crba" => Ok(Scheme::Crba),
            "aba" => Ok(Scheme::Aba),
            "md" => Ok(Scheme::MinDegree),
            "nd" => Ok(Scheme::NestedDissection),
            other => match other.strip_prefix("custom:") {
                Some(list) => list
                    .split(',')
                    .filter(|k| !k.trim().is_empty())
                    .map(|k| k.trim().parse::<VarKey>())
                    .collect::<Result<Vec<_>>>()
                    .map(Scheme::Custom),
                None => Err(Error::InvalidOrdering(format!(
                    "unknown ordering `{other}` (expected rnea, crba, aba, md, nd or custom:<keys>)"
                ))),
            },
        }
    }
}

fn incompatible(scheme: &Scheme, reason: impl Into<String>) -> Error {
    Error::IncompatibleScheme {
        scheme: scheme.to_string(),
        reason: reason.into(),
    }
}

/// Orderings that mirror the classical recursive algorithms, generalized to
/// trees. Loop-joint variables go last.
pub fn classic_ordering(model: &RobotModel, spec: &ProblemSpec, scheme: &Scheme) -> Result<Vec<VarKey>> {
    let roles = JointRoles::resolve(model, spec)?;
    let topo = model.topological_order();
    let rev: Vec<usize> = topo.iter().rev().copied().collect();
    let number = |k: usize| k + 1;
    let joints = model.joints();

    let mut order = Vec::new();
    match scheme {
        Scheme::Custom(keys) => return Ok(keys.clone()),
        Scheme::MinDegree | Scheme::NestedDissection => {
            return Err(incompatible(scheme, "heuristic orderings are computed from a graph"));
        }
        Scheme::Rnea => {
            if let Some(k) = topo.iter().find(|k| roles.accel_unknown(**k)) {
                return Err(incompatible(
                    scheme,
                    format!("joint `{}` has an unknown acceleration", joints[*k].name),
                ));
            }
            order.extend(rev.iter().filter(|k| roles.torque_unknown(**k)).map(|k| VarKey::torque(number(*k))));
            order.extend(topo.iter().map(|k| VarKey::wrench(number(*k))));
            order.extend(rev.iter().map(|k| VarKey::accel(joints[*k].child)));
        }
        Scheme::Crba | Scheme::Aba => {
            if let Some(k) = topo.iter().find(|k| roles.torque_unknown(**k)) {
                return Err(incompatible(
                    scheme,
                    format!("joint `{}` has an unknown torque", joints[*k].name),
                ));
            }
            if *scheme == Scheme::Crba {
                order.extend(rev.iter().map(|k| VarKey::wrench(number(*k))));
                order.extend(rev.iter().map(|k| VarKey::accel(joints[*k].child)));
                order.extend(rev.iter().filter(|k| roles.accel_unknown(**k)).map(|k| VarKey::joint_accel(number(*k))));
            } else {
                for &k in &rev {
                    order.push(VarKey::wrench(number(k)));
                    order.push(VarKey::accel(joints[k].child));
                    if roles.accel_unknown(k) {
                        order.push(VarKey::joint_accel(number(k)));
                    }
                }
            }
        }
    }
    let loops: Vec<usize> = (0..joints.len()).filter(|k| joints[*k].is_loop()).collect();
    order.extend(loops.iter().filter(|k| roles.torque_unknown(**k)).map(|k| VarKey::torque(number(*k))));
    order.extend(loops.iter().filter(|k| roles.accel_unknown(**k)).map(|k| VarKey::joint_accel(number(*k))));
    order.extend(loops.iter().map(|k| VarKey::wrench(number(*k))));
    Ok(order)
}

/// Ordering for any scheme; heuristics run on `graph`.
pub fn ordering_for(graph: &FactorGraph, model: &RobotModel, spec: &ProblemSpec, scheme: &Scheme) -> Result<Vec<VarKey>> {
    match scheme {
        Scheme::MinDegree => Ok(min_degree_ordering(graph)),
        Scheme::NestedDissection => Ok(nested_dissection_ordering(graph)),
        _ => classic_ordering(model, spec, scheme),
    }
}
