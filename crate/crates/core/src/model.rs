//! Problem instance: hypergraph topology, local/global index maps and net flows.
//!
//! Each edge carries an [`IncidenceMap`], the list of global nodes behind its
//! local slots. Gathering global prices onto an edge and scattering an edge
//! flow back into the net-flow vector are both pure index operations.

use std::collections::HashSet;
use std::fmt;

use crate::edges::Edge;
use crate::error::{Error, Result};
use crate::objectives::{EdgeObjectiveAtom, ObjectiveAtom};

/// A global node identifier, valid when strictly below the problem's node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIndex(pub usize);

impl NodeIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

impl From<usize> for NodeIndex {
    fn from(value: usize) -> Self {
        NodeIndex(value)
    }
}

/// Ordered global nodes of an edge, one per local slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMap {
    nodes: Vec<NodeIndex>,
}

impl IncidenceMap {
    /// Builds a map without checking it against a node count. Structural checks
    /// happen in [`validate`].
    pub fn new<I, N>(nodes: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<NodeIndex>,
    {
        IncidenceMap {
            nodes: nodes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn pair(source: usize, sink: usize) -> Self {
        Self::new([source, sink])
    }

    /// Local dimension `n_i`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeIndex] {
        &self.nodes
    }

    pub fn global(&self, slot: usize) -> usize {
        self.nodes[slot].0
    }

    /// Gathers `nu[global_nodes[k]]` for each local slot `k` into `out`.
    pub fn gather_into(&self, nu: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.nodes.len());
        for (o, node) in out.iter_mut().zip(&self.nodes) {
            *o = nu[node.0];
        }
    }

    /// Adds each local entry of `x` onto its global node in `y`.
    pub fn scatter_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nodes.len());
        for (xk, node) in x.iter().zip(&self.nodes) {
            y[node.0] += *xk;
        }
    }
}

/// Returns the local prices `A_i^T nu` of an edge.
pub fn gather_local(nu: &[f64], map: &IncidenceMap) -> Result<Vec<f64>> {
    for node in map.nodes() {
        if node.0 >= nu.len() {
            return Err(Error::IndexOutOfRange {
                index: node.0,
                num_nodes: nu.len(),
            });
        }
    }
    let mut out = vec![0.0; map.len()];
    map.gather_into(nu, &mut out);
    Ok(out)
}

/// `y += A_i x`.
pub fn scatter_accumulate(x: &[f64], map: &IncidenceMap, y: &mut [f64]) -> Result<()> {
    if x.len() != map.len() {
        return Err(Error::DimensionMismatch {
            what: "edge flow",
            expected: map.len(),
            actual: x.len(),
        });
    }
    for node in map.nodes() {
        if node.0 >= y.len() {
            return Err(Error::IndexOutOfRange {
                index: node.0,
                num_nodes: y.len(),
            });
        }
    }
    map.scatter_add(x, y);
    Ok(())
}

/// Per-edge flows `x_i`, negative entries flow into the edge.
pub type FlowVector = Vec<Vec<f64>>;

/// A convex flow problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    num_nodes: usize,
    edges: Vec<Edge>,
    objective: ObjectiveAtom,
    edge_objectives: Option<Vec<EdgeObjectiveAtom>>,
    warnings: Vec<String>,
}

impl Problem {
    /// Builds and validates a problem. Isolated nodes are kept as warnings.
    pub fn new(
        num_nodes: usize,
        edges: Vec<Edge>,
        objective: ObjectiveAtom,
        edge_objectives: Option<Vec<EdgeObjectiveAtom>>,
    ) -> Result<Self> {
        let problem = Self::new_unchecked(num_nodes, edges, objective, edge_objectives);
        let report = validate(&problem);
        if !report.is_ok() {
            return Err(Error::Invalid(report));
        }
        Ok(Problem {
            warnings: report.warnings,
            ..problem
        })
    }

    /// Builds a problem without validation. Pass it through [`validate`]
    /// before handing it to a solver.
    pub fn new_unchecked(
        num_nodes: usize,
        edges: Vec<Edge>,
        objective: ObjectiveAtom,
        edge_objectives: Option<Vec<EdgeObjectiveAtom>>,
    ) -> Self {
        Problem {
            num_nodes,
            edges,
            objective,
            edge_objectives,
            warnings: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn objective(&self) -> &ObjectiveAtom {
        &self.objective
    }

    pub fn edge_objectives(&self) -> Option<&[EdgeObjectiveAtom]> {
        self.edge_objectives.as_deref()
    }

    /// Edge objective of edge `i`, `Zero` when none were given.
    pub fn edge_objective(&self, i: usize) -> &EdgeObjectiveAtom {
        match &self.edge_objectives {
            Some(v) => &v[i],
            None => &EdgeObjectiveAtom::Zero,
        }
    }

    /// True when every edge utility is identically zero.
    pub fn has_zero_edge_objectives(&self) -> bool {
        self.edge_objectives
            .as_ref()
            .is_none_or(|v| v.iter().all(EdgeObjectiveAtom::is_zero))
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Same instance with the edges rejected by `keep` removed.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize, &Edge) -> bool) -> Result<Problem> {
        let mut edges = Vec::new();
        let mut objectives = self.edge_objectives.as_ref().map(|_| Vec::new());
        for (i, edge) in self.edges.iter().enumerate() {
            if keep(i, edge) {
                edges.push(edge.clone());
                if let (Some(out), Some(src)) = (objectives.as_mut(), self.edge_objectives.as_ref()) {
                    out.push(src[i].clone());
                }
            }
        }
        Problem::new(self.num_nodes, edges, self.objective.clone(), objectives)
    }
}

/// `y = sum_i A_i x_i`, accumulated in edge-index order.
pub fn net_flow(flows: &[Vec<f64>], problem: &Problem) -> Result<Vec<f64>> {
    if flows.len() != problem.num_edges() {
        return Err(Error::DimensionMismatch {
            what: "number of edge flows",
            expected: problem.num_edges(),
            actual: flows.len(),
        });
    }
    let mut y = vec![0.0; problem.num_nodes()];
    for (x, edge) in flows.iter().zip(problem.edges()) {
        scatter_accumulate(x, edge.map(), &mut y)?;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IndexOutOfRange { edge: usize, slot: usize, index: usize },
    DuplicateNode { edge: usize, node: usize },
    TooFewNodes { edge: usize, len: usize },
    EdgeObjectiveCount { expected: usize, actual: usize },
    ObjectiveDimension { expected: usize, actual: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { edge, slot, index } => {
                write!(f, "edges[{edge}].nodes[{slot}]: index {index} out of range")
            }
            Violation::DuplicateNode { edge, node } => {
                write!(f, "edges[{edge}]: duplicate node {node} in edge")
            }
            Violation::TooFewNodes { edge, len } => {
                write!(f, "edges[{edge}]: edge needs at least 2 nodes, has {len}")
            }
            Violation::EdgeObjectiveCount { expected, actual } => {
                write!(f, "edge_objectives: expected {expected} entries, got {actual}")
            }
            Violation::ObjectiveDimension { expected, actual } => {
                write!(f, "objective: dimension {actual} does not match {expected} nodes")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Structural checks on a problem instance.
pub fn validate(problem: &Problem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = problem.num_nodes;
    let mut touched = vec![false; n];

    for (e, edge) in problem.edges.iter().enumerate() {
        let map = edge.map();
        if map.len() < 2 {
            report.violations.push(Violation::TooFewNodes {
                edge: e,
                len: map.len(),
            });
        }
        let mut seen = HashSet::new();
        for (slot, node) in map.nodes().iter().enumerate() {
            if node.0 >= n {
                report.violations.push(Violation::IndexOutOfRange {
                    edge: e,
                    slot,
                    index: node.0,
                });
                continue;
            }
            touched[node.0] = true;
            if !seen.insert(node.0) {
                report
                    .violations
                    .push(Violation::DuplicateNode { edge: e, node: node.0 });
            }
        }
    }

    if let Some(objs) = &problem.edge_objectives {
        if objs.len() != problem.edges.len() {
            report.violations.push(Violation::EdgeObjectiveCount {
                expected: problem.edges.len(),
                actual: objs.len(),
            });
        }
    }

    if let Some(dim) = problem.objective.dim() {
        if dim != n {
            report.violations.push(Violation::ObjectiveDimension {
                expected: n,
                actual: dim,
            });
        }
    }

    for (j, hit) in touched.iter().enumerate() {
        if !hit {
            report
                .warnings
                .push(format!("node {j} is not incident to any edge"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::{Gain, GainEdge};

    fn lossless(a: usize, b: usize) -> Edge {
        Edge::Gain(GainEdge::new(IncidenceMap::pair(a, b), Gain::Lossless { eps: 1e-6 }, 1.0).unwrap())
    }

    #[test]
    fn gather_selects() {
        let map = IncidenceMap::new([2usize, 0]);
        assert_eq!(gather_local(&[10.0, 20.0, 30.0], &map).unwrap(), vec![30.0, 10.0]);
        let map = IncidenceMap::new([3usize, 1, 0]);
        assert_eq!(
            gather_local(&[0.5, 2.0, 0.0, 7.0], &map).unwrap(),
            vec![7.0, 2.0, 0.5]
        );
        let map = IncidenceMap::pair(0, 2);
        assert_eq!(gather_local(&[1.0, 1.0, 1.0], &map).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn gather_out_of_range() {
        let map = IncidenceMap::pair(0, 5);
        assert!(matches!(
            gather_local(&[1.0, 1.0], &map),
            Err(Error::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn scatter_examples() {
        let mut y = vec![0.0, 0.0];
        scatter_accumulate(&[-1.0, 1.0], &IncidenceMap::pair(0, 1), &mut y).unwrap();
        assert_eq!(y, vec![-1.0, 1.0]);

        let mut y = vec![3.0, 4.0];
        scatter_accumulate(&[0.0, 0.0], &IncidenceMap::pair(1, 0), &mut y).unwrap();
        assert_eq!(y, vec![3.0, 4.0]);

        let mut y = vec![0.0; 3];
        scatter_accumulate(&[-2.0, 2.0], &IncidenceMap::pair(0, 1), &mut y).unwrap();
        scatter_accumulate(&[-2.0, 2.0], &IncidenceMap::pair(1, 2), &mut y).unwrap();
        assert_eq!(y, vec![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn scatter_dimension_mismatch() {
        let mut y = vec![0.0; 2];
        assert!(scatter_accumulate(&[1.0], &IncidenceMap::pair(0, 1), &mut y).is_err());
    }

    #[test]
    fn net_flow_examples() {
        let objective = ObjectiveAtom::linear(vec![1.0; 3]).unwrap();
        let problem = Problem::new(3, vec![lossless(0, 2)], objective.clone(), None).unwrap();
        assert_eq!(net_flow(&[vec![0.0, 0.0]], &problem).unwrap(), vec![0.0; 3]);
        assert_eq!(
            net_flow(&[vec![-0.75, 0.75]], &problem).unwrap(),
            vec![-0.75, 0.0, 0.75]
        );
        assert!(net_flow(&[], &problem).is_err());
    }

    #[test]
    fn regularized_path_interior_node() {
        // Two eps-regularized lossless edges in series carrying w = 1.
        let eps = 1e-6;
        let objective = ObjectiveAtom::linear(vec![1.0; 3]).unwrap();
        let edges = vec![
            Edge::Gain(GainEdge::new(IncidenceMap::pair(0, 1), Gain::Lossless { eps }, 2.0).unwrap()),
            Edge::Gain(GainEdge::new(IncidenceMap::pair(1, 2), Gain::Lossless { eps }, 2.0).unwrap()),
        ];
        let problem = Problem::new(3, edges, objective, None).unwrap();
        let out = |i: usize| match &problem.edges()[i] {
            Edge::Gain(g) => g.gain_eval(1.0),
            _ => unreachable!(),
        };
        let y = net_flow(&[vec![-1.0, out(0)], vec![-1.0, out(1)]], &problem).unwrap();
        assert!(y[1].abs() <= eps / 2.0 + 1e-15);
    }

    #[test]
    fn validate_reports() {
        let objective = ObjectiveAtom::linear(vec![1.0; 3]).unwrap();
        let ok = Problem::new_unchecked(3, vec![lossless(0, 1), lossless(1, 2)], objective.clone(), None);
        assert!(validate(&ok).is_ok());
        assert!(validate(&ok).warnings.is_empty());

        let bad = Problem::new_unchecked(3, vec![lossless(0, 5)], objective.clone(), None);
        let report = validate(&bad);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::IndexOutOfRange { index: 5, .. }));
        assert!(report.to_string().contains("out of range"));

        let dup = Problem::new_unchecked(3, vec![lossless(2, 2)], objective.clone(), None);
        let report = validate(&dup);
        assert_eq!(report.violations, vec![Violation::DuplicateNode { edge: 0, node: 2 }]);

        let count = Problem::new_unchecked(
            3,
            vec![lossless(0, 1)],
            objective.clone(),
            Some(vec![]),
        );
        assert_eq!(validate(&count).violations.len(), 1);

        let isolated = Problem::new(3, vec![lossless(0, 1)], objective, None).unwrap();
        assert_eq!(isolated.warnings().len(), 1);
    }
}
