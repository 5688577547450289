use std::fmt::Write;

use super::{EliminationDag, FactorGraph};

/// Graphviz rendering of a factor graph: unknowns as circles, known
/// parameters as boxes, factors as filled dots.
pub fn graph_to_dot(graph: &FactorGraph) -> String {
    let mut out = String::from("graph factor_graph {\n");
    for key in graph.keys() {
        let _ = writeln!(out, "  \"{key}\" [shape=circle];");
    }
    for key in graph.params() {
        let _ = writeln!(out, "  \"{key}\" [shape=box];");
    }
    for (i, factor) in graph.factors().iter().enumerate() {
        let _ = writeln!(
            out,
            "  f{i} [shape=point, width=0.12, tooltip=\"{}\"];",
            factor.label()
        );
        for key in factor.keys().iter().chain(factor.params()) {
            let _ = writeln!(out, "  f{i} -- \"{key}\";");
        }
    }
    out.push_str("}\n");
    out
}

/// Graphviz rendering of an elimination DAG with edges pointing from each
/// parent to the variable that depends on it.
pub fn dag_to_dot(dag: &EliminationDag) -> String {
    let mut out = String::from("digraph elimination_dag {\n");
    for c in dag.conditionals() {
        let _ = writeln!(out, "  \"{}\" [shape=circle];", c.frontal());
    }
    for c in dag.conditionals() {
        for p in c.parents() {
            let _ = writeln!(out, "  \"{p}\" -> \"{}\";", c.frontal());
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgraph::{eliminate, LinearFactor, VarKey};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn empty_graph_has_empty_body() {
        assert_eq!(graph_to_dot(&FactorGraph::new()), "graph factor_graph {\n}\n");
        let dag = eliminate(&FactorGraph::new(), &[]).unwrap();
        assert_eq!(dag_to_dot(&dag), "digraph elimination_dag {\n}\n");
    }

    #[test]
    fn one_factor_one_variable() {
        let mut g = FactorGraph::new();
        g.add(
            LinearFactor::new(vec![(VarKey::torque(1), DMatrix::identity(1, 1))], DVector::zeros(1))
                .unwrap()
                .with_params(vec![VarKey::angle_rate(1)]),
        );
        let dot = graph_to_dot(&g);
        assert_eq!(dot.matches("shape=circle").count(), 1);
        assert_eq!(dot.matches("shape=point").count(), 1);
        assert_eq!(dot.matches("shape=box").count(), 1);
        assert!(dot.contains("f0 -- \"tau1\";"));
        assert!(dot.contains("f0 -- \"qd1\";"));
    }
}
