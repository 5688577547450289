use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{FactorGraph, VarKey};

type Adjacency = BTreeMap<VarKey, BTreeSet<VarKey>>;

/// Subgraphs at or below this size are ordered by minimum degree.
const DISSECTION_LEAF_SIZE: usize = 3;

/// Greedy minimum-degree ordering on the variable adjacency graph. The
/// adjacency is updated after each pick (neighbors of the eliminated variable
/// become a clique). Ties go to the smallest key.
pub fn min_degree_ordering(graph: &FactorGraph) -> Vec<VarKey> {
    min_degree(graph.adjacency())
}

fn min_degree(mut adj: Adjacency) -> Vec<VarKey> {
    let mut order = Vec::with_capacity(adj.len());
    while let Some(pick) = adj
        .iter()
        .min_by_key(|(key, nbrs)| (nbrs.len(), **key))
        .map(|(key, _)| *key)
    {
        let nbrs = adj.remove(&pick).unwrap();
        for a in &nbrs {
            let set = adj.get_mut(a).unwrap();
            set.remove(&pick);
            set.extend(nbrs.iter().filter(|b| *b != a));
        }
        order.push(pick);
    }
    order
}

fn induced(adj: &Adjacency, nodes: &BTreeSet<VarKey>) -> Adjacency {
    nodes
        .iter()
        .map(|n| (*n, adj[n].intersection(nodes).copied().collect()))
        .collect()
}

/// Breadth-first levels from `start` within `adj`.
fn bfs_levels(adj: &Adjacency, start: VarKey) -> Vec<Vec<VarKey>> {
    let mut level_of = BTreeMap::new();
    level_of.insert(start, 0usize);
    let mut queue = VecDeque::from([start]);
    let mut levels: Vec<Vec<VarKey>> = vec![vec![start]];
    while let Some(n) = queue.pop_front() {
        let l = level_of[&n];
        for m in &adj[&n] {
            if !level_of.contains_key(m) {
                level_of.insert(*m, l + 1);
                if levels.len() <= l + 1 {
                    levels.push(Vec::new());
                }
                levels[l + 1].push(*m);
                queue.push_back(*m);
            }
        }
    }
    levels
}

fn components(adj: &Adjacency) -> Vec<BTreeSet<VarKey>> {
    let mut seen = BTreeSet::new();
    let mut comps = Vec::new();
    for start in adj.keys() {
        if seen.contains(start) {
            continue;
        }
        let comp: BTreeSet<VarKey> = bfs_levels(adj, *start).into_iter().flatten().collect();
        seen.extend(comp.iter().copied());
        comps.push(comp);
    }
    comps
}

/// Start node for level structures: repeat BFS from the smallest key of the
/// deepest level until the eccentricity stops growing.
fn pseudo_peripheral(adj: &Adjacency) -> VarKey {
    let mut node = *adj.keys().next().unwrap();
    let mut depth = bfs_levels(adj, node).len();
    loop {
        let levels = bfs_levels(adj, node);
        let far = *levels.last().unwrap().iter().min().unwrap();
        let far_depth = bfs_levels(adj, far).len();
        if far_depth <= depth {
            return node;
        }
        node = far;
        depth = far_depth;
    }
}

fn dissect(adj: &Adjacency) -> Vec<VarKey> {
    if adj.len() <= DISSECTION_LEAF_SIZE {
        return min_degree(adj.clone());
    }
    let comps = components(adj);
    if comps.len() > 1 {
        return comps.iter().flat_map(|c| dissect(&induced(adj, c))).collect();
    }

    let levels = bfs_levels(adj, pseudo_peripheral(adj));
    if levels.len() < 3 {
        return min_degree(adj.clone());
    }
    // Candidate separators: each interior level, trimmed to the nodes that
    // touch the next level (the rest join the near side). Most balanced split
    // wins, then the smallest separator.
    let total = adj.len();
    let mut best: Option<((usize, usize, usize), BTreeSet<VarKey>, BTreeSet<VarKey>, BTreeSet<VarKey>)> = None;
    for l in 1..levels.len() - 1 {
        let next: BTreeSet<VarKey> = levels[l + 1].iter().copied().collect();
        let (sep, stay): (Vec<VarKey>, Vec<VarKey>) =
            levels[l].iter().partition(|n| adj[*n].iter().any(|m| next.contains(m)));
        let mut left: BTreeSet<VarKey> = levels[..l].iter().flatten().copied().collect();
        left.extend(stay);
        let right: BTreeSet<VarKey> = levels[l + 1..].iter().flatten().copied().collect();
        let score = (left.len().max(right.len()), sep.len(), l);
        if best.as_ref().is_none_or(|(s, ..)| score < *s) {
            best = Some((score, left, right, sep.into_iter().collect()));
        }
    }
    debug_assert!(best.as_ref().is_some_and(|(_, l, r, s)| l.len() + r.len() + s.len() == total));
    let (_, left, right, separator) = best.unwrap();

    let mut order = dissect(&induced(adj, &left));
    order.extend(dissect(&induced(adj, &right)));
    order.extend(min_degree(induced(adj, &separator)));

    // keep the split only if it is not clearly worse than minimum degree here
    let fallback = min_degree(adj.clone());
    if symbolic_edges(adj, &order) > symbolic_edges(adj, &fallback) + separator.len() {
        return fallback;
    }
    order
}

/// Number of DAG edges `order` would produce, from the adjacency alone.
fn symbolic_edges(adj: &Adjacency, order: &[VarKey]) -> usize {
    let mut adj = adj.clone();
    let mut edges = 0;
    for v in order {
        let nbrs = adj.remove(v).unwrap_or_default();
        edges += nbrs.len();
        for a in &nbrs {
            let set = adj.get_mut(a).unwrap();
            set.remove(v);
            set.extend(nbrs.iter().filter(|b| *b != a));
        }
    }
    edges
}

/// Nested dissection: recursive bisection by breadth-first level separators,
/// both halves first and the separator last. A split whose symbolic edge
/// count exceeds minimum degree's on the same subgraph by more than the
/// separator size is dropped in favor of minimum degree.
pub fn nested_dissection_ordering(graph: &FactorGraph) -> Vec<VarKey> {
    let adj = graph.adjacency();
    if adj.is_empty() {
        return Vec::new();
    }
    dissect(&adj)
}
