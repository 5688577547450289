use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, DVector, Dyn, QR};
use serde::Serialize;

use super::{FactorGraph, Solution, VarKey};
use crate::error::{Error, Result};

/// Relative singular-value threshold below which a frontal block is treated
/// as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Solved form of one variable: `R x + Σ Sₚ xₚ = d`, with `R` upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    frontal: VarKey,
    parents: Vec<VarKey>,
    r: DMatrix<f64>,
    s: Vec<DMatrix<f64>>,
    d: DVector<f64>,
}

impl Conditional {
    pub fn frontal(&self) -> VarKey {
        self.frontal
    }

    /// Parents in elimination order.
    pub fn parents(&self) -> &[VarKey] {
        &self.parents
    }

    pub fn diagonal_block(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn parent_blocks(&self) -> impl Iterator<Item = (&VarKey, &DMatrix<f64>)> {
        self.parents.iter().zip(&self.s)
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.d
    }

    /// Value of the frontal variable given values for all parents.
    pub fn solve(&self, parents: &Solution) -> DVector<f64> {
        self.solve_with(self.d.clone(), parents)
    }

    fn solve_with(&self, mut rhs: DVector<f64>, parents: &Solution) -> DVector<f64> {
        for (key, block) in self.parent_blocks() {
            let x = parents
                .get(key)
                .expect("parent must be solved before its child");
            rhs -= block * x;
        }
        self.r
            .solve_upper_triangular(&rhs)
            .expect("diagonal block was checked invertible during elimination")
    }
}

/// Orthogonal factor of one elimination step, kept so new right-hand sides
/// can be pushed through the same reduction.
#[derive(Debug, Clone)]
struct Step {
    sources: Vec<usize>,
    created: Option<usize>,
    /// Rows of the reduced system that hold unknowns.
    end: usize,
    qr: QR<f64, Dyn, Dyn>,
}

/// Conditionals in elimination order plus structural statistics.
#[derive(Debug, Clone)]
pub struct EliminationDag {
    conditionals: Vec<Conditional>,
    steps: Vec<Step>,
    source_factors: usize,
    edge_count: usize,
    fill_in: usize,
    frontal_sizes: Vec<(usize, usize)>,
    residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DagStats {
    pub ordering: Vec<VarKey>,
    pub edge_count: usize,
    pub fill_in: usize,
    /// (rows, columns) of the dense system stacked for each eliminated variable.
    pub frontal_sizes: Vec<(usize, usize)>,
}

impl EliminationDag {
    pub fn conditionals(&self) -> &[Conditional] {
        &self.conditionals
    }

    pub fn ordering(&self) -> Vec<VarKey> {
        self.conditionals.iter().map(|c| c.frontal).collect()
    }

    /// Total number of parent links.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Parent links between variables that shared no factor in the source graph.
    pub fn fill_in(&self) -> usize {
        self.fill_in
    }

    pub fn frontal_sizes(&self) -> &[(usize, usize)] {
        &self.frontal_sizes
    }

    /// Norm of the part of the right-hand side no variable could absorb:
    /// zero for consistent hard systems, the least-squares cost otherwise.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Dependency edges `(frontal, parent)`.
    pub fn edges(&self) -> Vec<(VarKey, VarKey)> {
        self.conditionals
            .iter()
            .flat_map(|c| c.parents.iter().map(move |p| (c.frontal, *p)))
            .collect()
    }

    /// One step of iterative refinement: solves for the correction driven by
    /// the residual of `x` on `graph`, which must be the eliminated graph.
    /// Restores accuracy on rows much smaller than their neighbors.
    pub fn refine(&self, graph: &FactorGraph, x: &Solution) -> Solution {
        assert_eq!(graph.factors().len(), self.source_factors, "refine needs the eliminated graph");
        let mut rhs: Vec<Option<DVector<f64>>> = graph
            .factors()
            .iter()
            .map(|f| Some(f.residual(x) * -f.weight()))
            .collect();
        let mut corrections = Vec::with_capacity(self.steps.len());
        for (step, cond) in self.steps.iter().zip(&self.conditionals) {
            let parts: Vec<DVector<f64>> = step.sources.iter().map(|id| rhs[*id].take().unwrap()).collect();
            let mut b = DVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flatten().copied());
            step.qr.q_tr_mul(&mut b);
            let dim = cond.frontal.dim();
            corrections.push(b.rows(0, dim).into_owned());
            if let Some(id) = step.created {
                debug_assert_eq!(id, rhs.len());
                rhs.push(Some(b.rows(dim, step.end - dim).into_owned()));
            }
        }
        let mut delta = Solution::new();
        for (cond, d) in self.conditionals.iter().zip(corrections).rev() {
            let v = cond.solve_with(d, &delta);
            delta.insert(cond.frontal, v);
        }
        x.iter()
            .map(|(k, v)| (*k, delta.get(k).map_or_else(|| v.clone(), |d| v + d)))
            .collect()
    }

    pub fn stats(&self) -> DagStats {
        DagStats {
            ordering: self.ordering(),
            edge_count: self.edge_count,
            fill_in: self.fill_in,
            frontal_sizes: self.frontal_sizes.clone(),
        }
    }
}

struct WorkFactor {
    keys: Vec<VarKey>,
    blocks: Vec<DMatrix<f64>>,
    rhs: DVector<f64>,
}

fn check_ordering(graph: &FactorGraph, ordering: &[VarKey]) -> Result<HashMap<VarKey, usize>> {
    let mut position = HashMap::with_capacity(ordering.len());
    for (i, key) in ordering.iter().enumerate() {
        if !graph.contains(key) {
            return Err(Error::InvalidOrdering(format!("{key} is not a graph variable")));
        }
        if position.insert(*key, i).is_some() {
            return Err(Error::InvalidOrdering(format!("{key} appears twice")));
        }
    }
    if position.len() != graph.num_variables() {
        let missing: Vec<String> = graph
            .keys()
            .filter(|k| !position.contains_key(k))
            .map(ToString::to_string)
            .collect();
        return Err(Error::InvalidOrdering(format!(
            "missing variables: {}",
            missing.join(", ")
        )));
    }
    Ok(position)
}

/// Sequential variable elimination.
///
/// For each frontal variable, all remaining factors touching it are stacked
/// into a dense system `[A_frontal | A_separator | b]` and reduced with a
/// Householder QR. The first rows become the conditional, the remaining rows
/// a new factor on the separator.
pub fn eliminate(graph: &FactorGraph, ordering: &[VarKey]) -> Result<EliminationDag> {
    let position = check_ordering(graph, ordering)?;
    let adjacency = graph.adjacency();

    let mut factors: Vec<Option<WorkFactor>> = graph
        .factors()
        .iter()
        .map(|f| {
            let w = f.weight();
            Some(WorkFactor {
                keys: f.keys().to_vec(),
                blocks: f.blocks().map(|(_, b)| b * w).collect(),
                rhs: f.rhs() * w,
            })
        })
        .collect();
    let mut involved: HashMap<VarKey, Vec<usize>> = HashMap::new();
    for (i, f) in graph.factors().iter().enumerate() {
        for key in f.keys() {
            involved.entry(*key).or_default().push(i);
        }
    }

    let mut conditionals = Vec::with_capacity(ordering.len());
    let mut steps = Vec::with_capacity(ordering.len());
    let mut frontal_sizes = Vec::with_capacity(ordering.len());
    let mut edge_count = 0;
    let mut fill_in = 0;
    let mut residual_sq = 0.0;

    for &frontal in ordering {
        let mut gathered = Vec::new();
        let mut sources = Vec::new();
        let mut seen = HashSet::new();
        for &id in involved.get(&frontal).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(id) {
                if let Some(f) = factors[id].take() {
                    gathered.push(f);
                    sources.push(id);
                }
            }
        }

        let mut separator: Vec<VarKey> = gathered
            .iter()
            .flat_map(|f| f.keys.iter().copied())
            .filter(|k| *k != frontal)
            .collect();
        separator.sort_by_key(|k| position[k]);
        separator.dedup();

        let dim = frontal.dim();
        let mut offsets = BTreeMap::new();
        offsets.insert(frontal, 0);
        let mut cols = dim;
        for key in &separator {
            offsets.insert(*key, cols);
            cols += key.dim();
        }
        let rows: usize = gathered.iter().map(|f| f.rhs.len()).sum();
        frontal_sizes.push((rows, cols));
        if rows < dim {
            return Err(Error::RankDeficient(frontal));
        }

        let mut stacked = DMatrix::zeros(rows, cols);
        let mut b = DVector::zeros(rows);
        let mut row = 0;
        for f in &gathered {
            let m = f.rhs.len();
            for (key, block) in f.keys.iter().zip(&f.blocks) {
                stacked
                    .view_mut((row, offsets[key]), (m, key.dim()))
                    .copy_from(block);
            }
            b.rows_mut(row, m).copy_from(&f.rhs);
            row += m;
        }

        let qr = stacked.qr();
        let r = qr.r();
        qr.q_tr_mul(&mut b);
        let r_frontal = r.view((0, 0), (dim, dim)).into_owned();
        let sv = r_frontal.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smax > 0.0) || smin <= RANK_TOLERANCE * smax {
            return Err(Error::RankDeficient(frontal));
        }

        let mut parent_blocks = Vec::with_capacity(separator.len());
        for key in &separator {
            parent_blocks.push(r.view((0, offsets[key]), (dim, key.dim())).into_owned());
            edge_count += 1;
            if !adjacency[&frontal].contains(key) {
                fill_in += 1;
            }
        }
        conditionals.push(Conditional {
            frontal,
            parents: separator.clone(),
            r: r_frontal,
            s: parent_blocks,
            d: b.rows(0, dim).into_owned(),
        });

        // rows below the conditional: a new factor on the separator
        let factor_end = r.nrows();
        let mut created = None;
        if !separator.is_empty() && factor_end > dim {
            let m = factor_end - dim;
            let blocks = separator
                .iter()
                .map(|key| r.view((dim, offsets[key]), (m, key.dim())).into_owned())
                .collect();
            let id = factors.len();
            created = Some(id);
            for key in &separator {
                involved.entry(*key).or_default().push(id);
            }
            factors.push(Some(WorkFactor {
                keys: separator,
                blocks,
                rhs: b.rows(dim, m).into_owned(),
            }));
        }
        // rows with no unknown left only carry residual
        for i in factor_end.max(dim)..rows {
            residual_sq += b[i].powi(2);
        }
        steps.push(Step {
            sources,
            created,
            end: factor_end,
            qr,
        });
    }

    Ok(EliminationDag {
        conditionals,
        steps,
        source_factors: graph.factors().len(),
        edge_count,
        fill_in,
        frontal_sizes,
        residual: residual_sq.sqrt(),
    })
}

/// Solves every conditional in reverse elimination order.
pub fn back_substitute(dag: &EliminationDag) -> Solution {
    let mut solution = Solution::new();
    for conditional in dag.conditionals.iter().rev() {
        let x = conditional.solve(&solution);
        solution.insert(conditional.frontal, x);
    }
    solution
}

/// Eliminates, back-substitutes and applies one refinement step.
pub fn solve(graph: &FactorGraph, ordering: &[VarKey]) -> Result<Solution> {
    let dag = eliminate(graph, ordering)?;
    Ok(dag.refine(graph, &back_substitute(&dag)))
}
