//! Robot description: links, tree joints and loop-closure joints.
//!
//! Link body frames sit at each link's center of mass (the base link keeps
//! its description frame). Inertial origins from the description are folded
//! into each joint's rest offset and screw axis when the model is built.

mod urdf;

use std::collections::{HashMap, VecDeque};

use nalgebra::{Matrix3, Vector3};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::spatial::{joint_transform, Pose, ScrewAxis, SpatialInertia};

pub use urdf::parse_urdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Fixed,
    LoopRevolute,
}

impl JointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Fixed => "fixed",
            JointKind::LoopRevolute => "loop-revolute",
        }
    }
}

/// Mass properties as written in a description, relative to the link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Inertial {
    pub origin: Pose,
    pub mass: f64,
    pub inertia: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDescription {
    pub name: String,
    pub inertial: Option<Inertial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDescription {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Joint frame in the parent link frame.
    pub origin: Pose,
    /// Rotation axis in the joint frame.
    pub axis: Vector3<f64>,
    /// `None` takes the default: tree revolute joints are actuated, loop and
    /// fixed joints are not.
    pub actuated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotDescription {
    pub name: String,
    pub links: Vec<LinkDescription>,
    pub joints: Vec<JointDescription>,
    pub tool: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    /// `None` for massless frames (and typically the base).
    pub inertia: Option<SpatialInertia>,
    /// Center-of-mass frame in the link's description frame.
    pub com_offset: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    /// Joint frame in the parent link's description frame.
    pub origin: Pose,
    /// Unit rotation axis in the joint frame.
    pub axis_direction: Vector3<f64>,
    /// Child body frame in the parent body frame at zero angle.
    pub rest_offset: Pose,
    /// Screw axis in the child body frame; `None` for fixed joints.
    pub axis: Option<ScrewAxis>,
    pub actuated: bool,
}

impl Joint {
    pub fn is_loop(&self) -> bool {
        self.kind == JointKind::LoopRevolute
    }

    pub fn is_movable(&self) -> bool {
        self.kind != JointKind::Fixed
    }

    /// Child-body-from-parent-body transform at `angle`.
    pub fn transform(&self, angle: f64) -> Pose {
        joint_transform(&self.rest_offset, self.axis.as_ref(), angle)
    }
}

/// Validated, immutable robot model.
///
/// Link 0 is the base. Tree joints come first in declaration order and tree
/// joint `k` (1-based number) has child link `k`; loop joints follow.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<Joint>,
    tool_link: Option<usize>,
    topological: Vec<usize>,
    parent_joint: Vec<Option<usize>>,
}

fn graph_error(msg: impl Into<String>) -> Error {
    Error::GraphError(msg.into())
}

impl RobotModel {
    pub fn from_description(desc: &RobotDescription) -> Result<Self> {
        let mut link_index: HashMap<&str, usize> = HashMap::new();
        for (i, l) in desc.links.iter().enumerate() {
            if link_index.insert(l.name.as_str(), i).is_some() {
                return Err(graph_error(format!("duplicate link `{}`", l.name)));
            }
        }
        let mut seen_joints = HashMap::new();
        for j in &desc.joints {
            if seen_joints.insert(j.name.as_str(), ()).is_some() {
                return Err(graph_error(format!("duplicate joint `{}`", j.name)));
            }
            for end in [&j.parent, &j.child] {
                if !link_index.contains_key(end.as_str()) {
                    return Err(graph_error(format!(
                        "joint `{}` references unknown link `{end}`",
                        j.name
                    )));
                }
            }
            if j.parent == j.child {
                return Err(graph_error(format!("joint `{}` connects a link to itself", j.name)));
            }
            if j.kind != JointKind::Fixed && (j.axis.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::MalformedDescription(format!(
                    "joint `{}` axis is not a unit vector",
                    j.name
                )));
            }
        }

        // spanning tree over the non-loop joints
        let tree: Vec<&JointDescription> = desc.joints.iter().filter(|j| j.kind != JointKind::LoopRevolute).collect();
        let loops: Vec<&JointDescription> = desc.joints.iter().filter(|j| j.kind == JointKind::LoopRevolute).collect();
        let mut parent_of: Vec<Option<usize>> = vec![None; desc.links.len()];
        for (k, j) in tree.iter().enumerate() {
            let c = link_index[j.child.as_str()];
            if parent_of[c].is_some() {
                return Err(graph_error(format!("link `{}` has more than one parent joint", j.child)));
            }
            parent_of[c] = Some(k);
        }
        let roots: Vec<usize> = (0..desc.links.len()).filter(|i| parent_of[*i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(graph_error("tree joints form a cycle (no root link)")),
            _ => {
                let names: Vec<&str> = roots.iter().map(|i| desc.links[*i].name.as_str()).collect();
                return Err(graph_error(format!("links not connected to a single base: {}", names.join(", "))));
            }
        };
        let mut reached = vec![false; desc.links.len()];
        reached[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for j in &tree {
                if link_index[j.parent.as_str()] == l {
                    let c = link_index[j.child.as_str()];
                    if !reached[c] {
                        reached[c] = true;
                        queue.push_back(c);
                    }
                }
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(graph_error(format!(
                "link `{}` is not reachable from base `{}` (cycle among tree joints)",
                desc.links[i].name, desc.links[root].name
            )));
        }

        // renumber: base first, then the child of each tree joint in order
        let mut order = vec![root];
        order.extend(tree.iter().map(|j| link_index[j.child.as_str()]));
        let mut new_index = vec![0; desc.links.len()];
        for (new, old) in order.iter().enumerate() {
            new_index[*old] = new;
        }
        let mut links = Vec::with_capacity(order.len());
        for old in &order {
            let d = &desc.links[*old];
            let (inertia, com_offset) = match &d.inertial {
                Some(inertial) => {
                    let si = SpatialInertia::new(inertial.mass, inertial.inertia).map_err(|reason| {
                        Error::InvalidInertia {
                            link: d.name.clone(),
                            reason: reason.to_string(),
                        }
                    })?;
                    (Some(si), inertial.origin)
                }
                None => (None, Pose::identity()),
            };
            links.push(Link {
                name: d.name.clone(),
                inertia,
                com_offset,
            });
        }
        let body_offset = |link: usize| {
            if link == 0 {
                Pose::identity()
            } else {
                links[link].com_offset
            }
        };

        let mut joints = Vec::with_capacity(desc.joints.len());
        for j in &tree {
            let parent = new_index[link_index[j.parent.as_str()]];
            let child = new_index[link_index[j.child.as_str()]];
            let (pc, cc) = (body_offset(parent), body_offset(child));
            let rest_offset = pc.inverse() * j.origin * cc;
            let axis = (j.kind == JointKind::Revolute)
                .then(|| ScrewAxis::revolute(j.axis.normalize(), Vector3::zeros()).transformed(&cc.inverse()));
            joints.push(Joint {
                name: j.name.clone(),
                kind: j.kind,
                parent,
                child,
                origin: j.origin,
                axis_direction: if j.kind == JointKind::Fixed { j.axis } else { j.axis.normalize() },
                rest_offset,
                axis,
                actuated: j.actuated.unwrap_or(j.kind == JointKind::Revolute),
            });
        }

        // topological order of tree joints (joint k has child link k + 1)
        let mut topological = Vec::with_capacity(tree.len());
        let mut queue = VecDeque::from([0usize]);
        while let Some(l) = queue.pop_front() {
            for (k, j) in joints.iter().enumerate() {
                if j.parent == l {
                    topological.push(k);
                    queue.push_back(j.child);
                }
            }
        }
        let mut parent_joint = vec![None; links.len()];
        for (k, j) in joints.iter().enumerate() {
            parent_joint[j.child] = Some(k);
        }

        // zero-angle world poses of body frames close each loop by construction
        let mut rest_world = vec![Pose::identity(); links.len()];
        for &k in &topological {
            let j = &joints[k];
            rest_world[j.child] = rest_world[j.parent] * j.rest_offset;
        }
        for j in &loops {
            let parent = new_index[link_index[j.parent.as_str()]];
            let child = new_index[link_index[j.child.as_str()]];
            let joint_world = rest_world[parent] * body_offset(parent).inverse() * j.origin;
            let child_from_joint = rest_world[child].inverse() * joint_world;
            joints.push(Joint {
                name: j.name.clone(),
                kind: JointKind::LoopRevolute,
                parent,
                child,
                origin: j.origin,
                axis_direction: j.axis.normalize(),
                rest_offset: rest_world[parent].inverse() * rest_world[child],
                axis: Some(ScrewAxis::revolute(j.axis.normalize(), Vector3::zeros()).transformed(&child_from_joint)),
                actuated: j.actuated.unwrap_or(false),
            });
        }

        let tool_link = match &desc.tool {
            Some(name) => Some(
                link_index
                    .get(name.as_str())
                    .map(|i| new_index[*i])
                    .ok_or_else(|| graph_error(format!("tool link `{name}` does not exist")))?,
            ),
            None => tree.last().map(|j| new_index[link_index[j.child.as_str()]]),
        };

        Ok(Self {
            name: desc.name.clone(),
            links,
            joints,
            tool_link,
            topological,
            parent_joint,
        })
    }

    /// Description that rebuilds this model.
    pub fn to_description(&self) -> RobotDescription {
        RobotDescription {
            name: self.name.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkDescription {
                    name: l.name.clone(),
                    inertial: l.inertia.map(|si| Inertial {
                        origin: l.com_offset,
                        mass: si.mass(),
                        inertia: *si.rotational(),
                    }),
                })
                .collect(),
            joints: self
                .joints
                .iter()
                .map(|j| JointDescription {
                    name: j.name.clone(),
                    kind: j.kind,
                    parent: self.links[j.parent].name.clone(),
                    child: self.links[j.child].name.clone(),
                    origin: j.origin,
                    axis: j.axis_direction,
                    actuated: Some(j.actuated),
                })
                .collect(),
            tool: self.tool_link.map(|t| self.links[t].name.clone()),
        }
    }

    /// Returns a new model with one more loop-closure joint. The loop is
    /// assumed closed at zero joint angles; the child side of the joint is
    /// derived from that configuration.
    pub fn add_loop_joint(&self, joint: JointDescription) -> Result<RobotModel> {
        let mut desc = self.to_description();
        desc.joints.push(JointDescription {
            kind: JointKind::LoopRevolute,
            ..joint
        });
        RobotModel::from_description(&desc)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn base_link(&self) -> usize {
        0
    }

    pub fn tool_link(&self) -> Option<usize> {
        self.tool_link
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Tree joint indices ordered parents before children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topological
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn num_tree_joints(&self) -> usize {
        self.topological.len()
    }

    pub fn has_loops(&self) -> bool {
        self.joints.iter().any(Joint::is_loop)
    }

    /// Indices of non-fixed joints (tree then loop); joint-state vectors follow this order.
    pub fn movable_joints(&self) -> Vec<usize> {
        (0..self.joints.len()).filter(|k| self.joints[*k].is_movable()).collect()
    }

    /// Indices of actuated joints; problem designations follow this order.
    pub fn actuated_joints(&self) -> Vec<usize> {
        (0..self.joints.len()).filter(|k| self.joints[*k].actuated).collect()
    }

    /// Longest run of tree joints from the base to a link.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.links.len()];
        for &k in &self.topological {
            let j = &self.joints[k];
            depth[j.child] = depth[j.parent] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Body frame offset from the link's description frame.
    pub fn body_offset(&self, link: usize) -> Pose {
        if link == 0 {
            Pose::identity()
        } else {
            self.links[link].com_offset
        }
    }

    pub fn to_urdf(&self) -> String {
        urdf::write_urdf(&self.to_description())
    }

    /// Canonical JSON description, numbers at full precision.
    pub fn to_json(&self) -> Value {
        fn pose_json(p: &Pose) -> Value {
            let r = p.rotation();
            json!({
                "xyz": p.translation().as_slice(),
                "rpy": p.rpy().as_slice(),
                "rotation": [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]],
            })
        }
        let links: Vec<Value> = self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (mass, inertia) = match &l.inertia {
                    Some(si) => {
                        let m = si.rotational();
                        (
                            json!(si.mass()),
                            json!([[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]),
                        )
                    }
                    None => (Value::Null, Value::Null),
                };
                json!({
                    "index": i,
                    "name": l.name,
                    "mass": mass,
                    "inertia": inertia,
                    "comOffset": pose_json(&l.com_offset),
                })
            })
            .collect();
        let joints: Vec<Value> = self
            .joints
            .iter()
            .enumerate()
            .map(|(k, j)| {
                json!({
                    "number": k + 1,
                    "name": j.name,
                    "kind": j.kind.as_str(),
                    "parent": self.links[j.parent].name,
                    "child": self.links[j.child].name,
                    "actuated": j.actuated,
                    "origin": pose_json(&j.origin),
                    "axis": j.axis_direction.as_slice(),
                    "restOffset": pose_json(&j.rest_offset),
                    "screwAxis": j.axis.map(|a| a.as_vector().as_slice().to_vec()),
                })
            })
            .collect();
        json!({
            "name": self.name,
            "baseLink": self.links[0].name,
            "toolLink": self.tool_link.map(|t| self.links[t].name.clone()),
            "depth": self.depth(),
            "links": links,
            "joints": joints,
        })
    }

    /// Structural equality with numeric fields compared within `tol`.
    pub fn approx_eq(&self, other: &RobotModel, tol: f64) -> bool {
        fn pose_eq(a: &Pose, b: &Pose, tol: f64) -> bool {
            (a.to_homogeneous() - b.to_homogeneous()).amax() <= tol
        }
        if self.name != other.name
            || self.links.len() != other.links.len()
            || self.joints.len() != other.joints.len()
            || self.tool_link != other.tool_link
        {
            return false;
        }
        let links_eq = self.links.iter().zip(&other.links).all(|(a, b)| {
            a.name == b.name
                && pose_eq(&a.com_offset, &b.com_offset, tol)
                && match (&a.inertia, &b.inertia) {
                    (None, None) => true,
                    (Some(x), Some(y)) => {
                        (x.mass() - y.mass()).abs() <= tol && (x.rotational() - y.rotational()).amax() <= tol
                    }
                    _ => false,
                }
        });
        let joints_eq = self.joints.iter().zip(&other.joints).all(|(a, b)| {
            a.name == b.name
                && a.kind == b.kind
                && a.parent == b.parent
                && a.child == b.child
                && a.actuated == b.actuated
                && pose_eq(&a.origin, &b.origin, tol)
                && pose_eq(&a.rest_offset, &b.rest_offset, tol)
                && (a.axis_direction - b.axis_direction).amax() <= tol
                && match (&a.axis, &b.axis) {
                    (None, None) => true,
                    (Some(x), Some(y)) => (x.as_vector() - y.as_vector()).amax() <= tol,
                    _ => false,
                }
        });
        links_eq && joints_eq
    }
}
