//! Block-sparse linear factor graphs.
//!
//! A [`FactorGraph`] is a set of weighted linear constraints
//! `w (Σ Aₖ xₖ − b) = 0` over vector-valued variables. Variables are
//! eliminated one at a time into an [`EliminationDag`] of conditionals and
//! recovered by back-substitution.

mod dot;
mod eliminate;
mod ordering;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use dot::{dag_to_dot, graph_to_dot};
pub use eliminate::{back_substitute, eliminate, solve, Conditional, DagStats, EliminationDag};
pub use ordering::{min_degree_ordering, nested_dissection_ordering};

/// Weight of the hard constraint tier.
pub const HARD_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Twist,
    Accel,
    Wrench,
    JointAngleRate,
    JointAccel,
    Torque,
}

impl VarKind {
    pub fn dim(self) -> usize {
        match self {
            VarKind::Twist | VarKind::Accel | VarKind::Wrench => 6,
            VarKind::JointAngleRate | VarKind::JointAccel | VarKind::Torque => 1,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            VarKind::Twist => "V",
            VarKind::Accel => "Vdot",
            VarKind::Wrench => "F",
            VarKind::JointAngleRate => "qd",
            VarKind::JointAccel => "qdd",
            VarKind::Torque => "tau",
        }
    }
}

/// Variable identifier: link quantities are indexed by link number, joint
/// quantities by joint number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub kind: VarKind,
    pub index: usize,
}

impl VarKey {
    pub const fn new(kind: VarKind, index: usize) -> Self {
        Self { kind, index }
    }

    pub const fn twist(link: usize) -> Self {
        Self::new(VarKind::Twist, link)
    }

    pub const fn accel(link: usize) -> Self {
        Self::new(VarKind::Accel, link)
    }

    pub const fn wrench(joint: usize) -> Self {
        Self::new(VarKind::Wrench, joint)
    }

    pub const fn angle_rate(joint: usize) -> Self {
        Self::new(VarKind::JointAngleRate, joint)
    }

    pub const fn joint_accel(joint: usize) -> Self {
        Self::new(VarKind::JointAccel, joint)
    }

    pub const fn torque(joint: usize) -> Self {
        Self::new(VarKind::Torque, joint)
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.index)
    }
}

impl FromStr for VarKey {
    type Err = Error;

    /// Accepts the display names (`tau1`, `qdd2`, `Vdot3`, `F1`, `V2`, `qd1`)
    /// and the short aliases `t1` (torque) and `a2` (joint acceleration).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| Error::InvalidOrdering(format!("bad variable key `{s}`")))?;
        let (prefix, digits) = s.split_at(split);
        let index: usize = digits
            .parse()
            .map_err(|_| Error::InvalidOrdering(format!("bad variable key `{s}`")))?;
        let kind = match prefix {
            "V" => VarKind::Twist,
            "Vdot" | "A" => VarKind::Accel,
            "F" => VarKind::Wrench,
            "qd" => VarKind::JointAngleRate,
            "qdd" | "a" => VarKind::JointAccel,
            "tau" | "t" => VarKind::Torque,
            _ => return Err(Error::InvalidOrdering(format!("bad variable key `{s}`"))),
        };
        Ok(VarKey::new(kind, index))
    }
}

impl Serialize for VarKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VarKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Weighted linear constraint `weight · (Σ blockₖ xₖ − rhs) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFactor {
    keys: Vec<VarKey>,
    blocks: Vec<DMatrix<f64>>,
    rhs: DVector<f64>,
    weight: f64,
    params: Vec<VarKey>,
    label: String,
}

impl LinearFactor {
    pub fn new(blocks: Vec<(VarKey, DMatrix<f64>)>, rhs: DVector<f64>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("factor without blocks".into()));
        }
        let rows = rhs.len();
        let mut keys = Vec::with_capacity(blocks.len());
        let mut mats = Vec::with_capacity(blocks.len());
        for (key, block) in blocks {
            if block.nrows() != rows || block.ncols() != key.dim() {
                return Err(Error::InvalidInput(format!(
                    "block for {key} is {}x{}, expected {rows}x{}",
                    block.nrows(),
                    block.ncols(),
                    key.dim()
                )));
            }
            if keys.contains(&key) {
                return Err(Error::InvalidInput(format!("duplicate block for {key}")));
            }
            keys.push(key);
            mats.push(block);
        }
        Ok(Self {
            keys,
            blocks: mats,
            rhs,
            weight: HARD_WEIGHT,
            params: Vec::new(),
            label: String::new(),
        })
    }

    /// Row scale applied to the whole factor; 1 is the hard tier.
    pub fn with_weight(mut self, weight: f64) -> Self {
        assert!(weight >= 0.0 && weight.is_finite(), "weight must be finite and non-negative");
        self.weight = weight;
        self
    }

    /// Known quantities folded into the coefficients or right-hand side.
    pub fn with_params(mut self, params: Vec<VarKey>) -> Self {
        self.params = params;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&VarKey, &DMatrix<f64>)> {
        self.keys.iter().zip(&self.blocks)
    }

    pub fn block(&self, key: &VarKey) -> Option<&DMatrix<f64>> {
        self.keys.iter().position(|k| k == key).map(|i| &self.blocks[i])
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn is_hard(&self) -> bool {
        self.weight >= HARD_WEIGHT
    }

    pub fn params(&self) -> &[VarKey] {
        &self.params
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Unweighted residual `Σ Aₖ xₖ − b`. Missing variables count as zero.
    pub fn residual(&self, solution: &Solution) -> DVector<f64> {
        let mut r = -self.rhs.clone();
        for (key, block) in self.blocks() {
            if let Some(x) = solution.get(key) {
                r += block * x;
            }
        }
        r
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorGraph {
    factors: Vec<LinearFactor>,
    variables: BTreeMap<VarKey, usize>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, factor: LinearFactor) {
        for key in factor.keys() {
            self.variables.insert(*key, key.dim());
        }
        self.factors.push(factor);
    }

    pub fn factors(&self) -> &[LinearFactor] {
        &self.factors
    }

    pub fn keys(&self) -> impl Iterator<Item = &VarKey> {
        self.variables.keys()
    }

    pub fn contains(&self, key: &VarKey) -> bool {
        self.variables.contains_key(key)
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Total scalar unknowns.
    pub fn dim(&self) -> usize {
        self.variables.values().sum()
    }

    /// Total constraint rows.
    pub fn rows(&self) -> usize {
        self.factors.iter().map(LinearFactor::rows).sum()
    }

    /// Known quantities referenced by any factor.
    pub fn params(&self) -> BTreeSet<VarKey> {
        self.factors
            .iter()
            .flat_map(|f| f.params().iter().copied())
            .collect()
    }

    /// Variable adjacency: two variables are neighbors if they share a factor.
    pub fn adjacency(&self) -> BTreeMap<VarKey, BTreeSet<VarKey>> {
        let mut adj: BTreeMap<VarKey, BTreeSet<VarKey>> =
            self.variables.keys().map(|k| (*k, BTreeSet::new())).collect();
        for f in &self.factors {
            for a in f.keys() {
                for b in f.keys() {
                    if a != b {
                        adj.get_mut(a).unwrap().insert(*b);
                    }
                }
            }
        }
        adj
    }

    /// Max-abs residual over the hard-tier factors.
    pub fn max_hard_residual(&self, solution: &Solution) -> f64 {
        self.factors
            .iter()
            .filter(|f| f.is_hard())
            .map(|f| f.residual(solution).amax())
            .fold(0.0, f64::max)
    }
}

/// Values for every variable of a graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Solution(BTreeMap<VarKey, DVector<f64>>);

impl Solution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: VarKey, value: DVector<f64>) {
        self.0.insert(key, value);
    }

    pub fn get(&self, key: &VarKey) -> Option<&DVector<f64>> {
        self.0.get(key)
    }

    /// Scalar value of a one-dimensional variable.
    pub fn scalar(&self, key: &VarKey) -> Option<f64> {
        self.0.get(key).map(|v| v[0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarKey, &DVector<f64>)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest componentwise difference; infinite if the key sets differ.
    pub fn max_abs_diff(&self, other: &Solution) -> f64 {
        if self.0.len() != other.0.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (key, a) in &self.0 {
            match other.0.get(key) {
                Some(b) if a.len() == b.len() => worst = worst.max((a - b).amax()),
                _ => return f64::INFINITY,
            }
        }
        worst
    }
}

impl FromIterator<(VarKey, DVector<f64>)> for Solution {
    fn from_iter<I: IntoIterator<Item = (VarKey, DVector<f64>)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
