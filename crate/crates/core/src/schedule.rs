//! Orderings of directed edge updates.
//!
//! A schedule is a pure function of graph topology. Ties are always broken
//! by `(variable id, factor id)` ascending so loopy fixed points are
//! reproducible.

use std::collections::{HashMap, HashSet};

use serde_json::Value;

use crate::error::ScheduleError;
use crate::graph::{FactorGraph, FactorId, VarId};

pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub factor: FactorId,
    pub position: usize,
    pub var: VarId,
}

/// Dense numbering of the (factor, variable) edges of a graph: factors in id
/// order, then positions within each factor.
#[derive(Debug, Clone)]
pub struct EdgeIndex {
    edges: Vec<Edge>,
    factor_base: Vec<usize>,
    var_edges: Vec<Vec<EdgeId>>,
}

impl EdgeIndex {
    pub fn new(graph: &FactorGraph) -> Self {
        let mut edges = Vec::with_capacity(graph.edge_count());
        let mut factor_base = vec![usize::MAX; graph.factor_id_bound()];
        let mut var_edges = vec![Vec::new(); graph.variable_count()];
        for (fid, f) in graph.factors() {
            factor_base[fid.0] = edges.len();
            for (position, &var) in f.vars().iter().enumerate() {
                var_edges[var.0].push(edges.len());
                edges.push(Edge { factor: fid, position, var });
            }
        }
        Self { edges, factor_base, var_edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge of `factor` at `position`.
    pub fn factor_edge(&self, factor: FactorId, position: usize) -> EdgeId {
        self.factor_base[factor.0] + position
    }

    /// Edges of `var`, ascending by factor id.
    pub fn var_edges(&self, var: VarId) -> &[EdgeId] {
        &self.var_edges[var.0]
    }

    pub fn find(&self, factor: FactorId, var: VarId) -> Option<EdgeId> {
        let base = *self.factor_base.get(factor.0)?;
        if base == usize::MAX {
            return None;
        }
        self.var_edges
            .get(var.0)?
            .iter()
            .copied()
            .find(|&e| self.edges[e].factor == factor && e >= base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    ToFactor,
    ToVariable,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ToFactor => "v2f",
            Direction::ToVariable => "f2v",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub factor: FactorId,
    pub var: VarId,
    pub direction: Direction,
}

impl Step {
    pub fn to_factor(var: VarId, factor: FactorId) -> Self {
        Self { factor, var, direction: Direction::ToFactor }
    }

    pub fn to_variable(factor: FactorId, var: VarId) -> Self {
        Self { factor, var, direction: Direction::ToVariable }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Flooding,
    Sequential,
    Tree,
    Hierarchical,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    steps: Vec<Step>,
    repeat: bool,
}

impl Schedule {
    /// All variable-to-factor updates, then all factor-to-variable updates.
    pub fn flooding(graph: &FactorGraph) -> Result<Self, ScheduleError> {
        let sorted = sorted_edges(graph);
        if sorted.is_empty() {
            return Err(ScheduleError::EmptyGraph);
        }
        let mut steps: Vec<Step> = sorted.iter().map(|&(v, f)| Step::to_factor(v, f)).collect();
        steps.extend(sorted.iter().map(|&(v, f)| Step::to_variable(f, v)));
        Ok(Self { kind: ScheduleKind::Flooding, steps, repeat: true })
    }

    /// Per factor (ascending id): all inputs, then all outputs.
    pub fn sequential(graph: &FactorGraph) -> Result<Self, ScheduleError> {
        let mut steps = Vec::new();
        for (fid, f) in graph.factors() {
            steps.extend(f.vars().iter().map(|&v| Step::to_factor(v, fid)));
            steps.extend(f.vars().iter().map(|&v| Step::to_variable(fid, v)));
        }
        if steps.is_empty() {
            return Err(ScheduleError::EmptyGraph);
        }
        Ok(Self { kind: ScheduleKind::Sequential, steps, repeat: true })
    }

    /// Leaves-to-root then root-to-leaves over each connected component; the
    /// root is the component's highest variable id. Fails on cyclic graphs.
    pub fn tree(graph: &FactorGraph) -> Result<Self, ScheduleError> {
        if graph.edge_count() == 0 {
            return Err(ScheduleError::EmptyGraph);
        }
        let steps = tree_steps(graph, |_| true, |_| true).map_err(ScheduleError::Cycle)?;
        Ok(Self { kind: ScheduleKind::Tree, steps, repeat: false })
    }

    /// Flooding over the top-level structure where each nested instance is
    /// updated as a unit: first every message into an instance from outside,
    /// then, per instance, a tree pass over its internal variables followed
    /// by its messages back out. Equals flooding when nothing is nested.
    pub fn hierarchical(graph: &FactorGraph) -> Result<Self, ScheduleError> {
        if graph.edge_count() == 0 {
            return Err(ScheduleError::EmptyGraph);
        }
        let mut owner: HashMap<FactorId, usize> = HashMap::new();
        let mut internal: Vec<HashSet<VarId>> = Vec::new();
        for (i, inst) in graph.nested().iter().enumerate() {
            for &f in &inst.factors {
                owner.insert(f, i);
            }
            internal.push(inst.variables.iter().copied().collect());
        }
        let is_internal = |f: FactorId, v: VarId| owner.get(&f).is_some_and(|&i| internal[i].contains(&v));

        let sorted = sorted_edges(graph);
        let mut steps: Vec<Step> = sorted
            .iter()
            .filter(|&&(v, f)| !is_internal(f, v))
            .map(|&(v, f)| Step::to_factor(v, f))
            .collect();

        // blocks ordered by their smallest factor id
        let mut blocks: Vec<(FactorId, Option<usize>)> = Vec::new();
        for (fid, _) in graph.factors() {
            if !owner.contains_key(&fid) {
                blocks.push((fid, None));
            }
        }
        for (i, inst) in graph.nested().iter().enumerate() {
            if let Some(&min) = inst.factors.iter().min() {
                blocks.push((min, Some(i)));
            }
        }
        blocks.sort();

        for (fid, inst) in blocks {
            match inst {
                None => {
                    let mut vars = graph.factor(fid).unwrap().vars().to_vec();
                    vars.sort();
                    steps.extend(vars.into_iter().map(|v| Step::to_variable(fid, v)));
                }
                Some(i) => {
                    let members: HashSet<FactorId> = graph.nested()[i].factors.iter().copied().collect();
                    let inside = &internal[i];
                    match tree_steps(graph, |f| members.contains(&f), |v| inside.contains(&v)) {
                        Ok(inner) => steps.extend(inner),
                        Err(_) => {
                            let local: Vec<(VarId, FactorId)> = sorted
                                .iter()
                                .copied()
                                .filter(|&(v, f)| members.contains(&f) && inside.contains(&v))
                                .collect();
                            steps.extend(local.iter().map(|&(v, f)| Step::to_factor(v, f)));
                            steps.extend(local.iter().map(|&(v, f)| Step::to_variable(f, v)));
                        }
                    }
                    steps.extend(
                        sorted
                            .iter()
                            .filter(|&&(v, f)| members.contains(&f) && !inside.contains(&v))
                            .map(|&(v, f)| Step::to_variable(f, v)),
                    );
                }
            }
        }
        Ok(Self { kind: ScheduleKind::Hierarchical, steps, repeat: true })
    }

    /// User-supplied steps, accepted verbatim once every edge is checked.
    pub fn custom(graph: &FactorGraph, steps: Vec<Step>) -> Result<Self, ScheduleError> {
        for s in &steps {
            let ok = graph
                .factor(s.factor)
                .is_some_and(|f| f.position_of(s.var).is_some());
            if !ok {
                return Err(ScheduleError::DanglingEdge(s.factor, s.var));
            }
        }
        Ok(Self { kind: ScheduleKind::Custom, steps, repeat: true })
    }

    /// The subsequence `steps` of `base`, keeping its kind and repetition.
    pub fn filtered(base: &Schedule, steps: Vec<Step>) -> Self {
        Self { kind: base.kind, steps, repeat: base.repeat }
    }

    /// Tree schedule when the graph is acyclic, flooding otherwise.
    pub fn default_for(graph: &FactorGraph) -> Result<Self, ScheduleError> {
        match Self::tree(graph) {
            Err(ScheduleError::Cycle(_)) => Self::flooding(graph),
            other => other,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether one application is one iteration of a repeated loop (false for
    /// tree schedules, which are exact after a single application).
    pub fn repeats(&self) -> bool {
        self.repeat
    }

    pub fn resolve(&self, edges: &EdgeIndex) -> Result<Vec<(EdgeId, Direction)>, ScheduleError> {
        self.steps
            .iter()
            .map(|s| {
                edges
                    .find(s.factor, s.var)
                    .map(|e| (e, s.direction))
                    .ok_or(ScheduleError::DanglingEdge(s.factor, s.var))
            })
            .collect()
    }

    /// Parses a JSON list of `[factor_id, variable, direction]` where the
    /// variable is an integer id or a variable name and the direction is
    /// `"v2f"` or `"f2v"`.
    pub fn custom_from_json(graph: &FactorGraph, text: &str) -> Result<Self, String> {
        let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let items = value.as_array().ok_or("custom schedule must be a JSON list")?;
        let mut steps = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let bad = || format!("schedule step {i} must be [factor_id, variable, \"v2f\"|\"f2v\"]");
            let triple = item.as_array().filter(|a| a.len() == 3).ok_or_else(bad)?;
            let factor = FactorId(triple[0].as_u64().ok_or_else(bad)? as usize);
            let var = match &triple[1] {
                Value::Number(n) => VarId(n.as_u64().ok_or_else(bad)? as usize),
                Value::String(s) => graph
                    .find_variable(s)
                    .ok_or_else(|| format!("schedule step {i}: unknown variable `{s}`"))?,
                _ => return Err(bad()),
            };
            let direction = match triple[2].as_str() {
                Some("v2f") | Some("to_factor") => Direction::ToFactor,
                Some("f2v") | Some("to_variable") => Direction::ToVariable,
                _ => return Err(bad()),
            };
            steps.push(Step { factor, var, direction });
        }
        Self::custom(graph, steps).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.steps
                .iter()
                .map(|s| serde_json::json!([s.factor.0, s.var.0, s.direction.as_str()]))
                .collect(),
        )
    }
}

/// Edges as `(var, factor)` ascending.
fn sorted_edges(graph: &FactorGraph) -> Vec<(VarId, FactorId)> {
    let mut out: Vec<(VarId, FactorId)> = graph
        .factors()
        .flat_map(|(fid, f)| f.vars().iter().map(move |&v| (v, fid)))
        .collect();
    out.sort();
    out
}

/// Some cycle of the graph, as a list of edges, or `None` when acyclic.
pub fn find_cycle(graph: &FactorGraph) -> Option<Vec<(FactorId, VarId)>> {
    tree_steps(graph, |_| true, |_| true).err()
}

pub fn is_acyclic(graph: &FactorGraph) -> bool {
    find_cycle(graph).is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Node {
    Var(VarId),
    Factor(FactorId),
}

/// Two-pass tree schedule over the subgraph of included factors and
/// variables. Returns the edges of a cycle on failure.
fn tree_steps(
    graph: &FactorGraph,
    include_factor: impl Fn(FactorId) -> bool,
    include_var: impl Fn(VarId) -> bool,
) -> Result<Vec<Step>, Vec<(FactorId, VarId)>> {
    let neighbors = |n: Node| -> Vec<Node> {
        match n {
            Node::Var(v) => graph
                .factors_of(v)
                .iter()
                .copied()
                .filter(|&f| include_factor(f))
                .map(Node::Factor)
                .collect(),
            Node::Factor(f) => {
                let mut vs: Vec<VarId> = graph
                    .factor(f)
                    .unwrap()
                    .vars()
                    .iter()
                    .copied()
                    .filter(|&v| include_var(v))
                    .collect();
                vs.sort();
                vs.into_iter().map(Node::Var).collect()
            }
        }
    };

    let mut visited: HashSet<Node> = HashSet::new();
    let mut steps = Vec::new();
    for v in graph.var_ids().filter(|&v| include_var(v)) {
        let start = Node::Var(v);
        if visited.contains(&start) || neighbors(start).is_empty() {
            continue;
        }
        // collect the component to find its root
        let mut component = vec![start];
        let mut seen: HashSet<Node> = HashSet::from([start]);
        let mut i = 0;
        while i < component.len() {
            for n in neighbors(component[i]) {
                if seen.insert(n) {
                    component.push(n);
                }
            }
            i += 1;
        }
        let root = component
            .iter()
            .filter_map(|n| match n {
                Node::Var(v) => Some(*v),
                _ => None,
            })
            .max()
            .unwrap();

        // iterative DFS recording parents, pre-order and post-order
        let root = Node::Var(root);
        let mut parent: HashMap<Node, Node> = HashMap::new();
        let mut pre = Vec::new();
        let mut post = Vec::new();
        let mut stack: Vec<(Node, Vec<Node>, usize)> = vec![(root, neighbors(root), 0)];
        visited.insert(root);
        pre.push(root);
        while let Some((node, nbrs, next)) = stack.last_mut() {
            if *next < nbrs.len() {
                let n = nbrs[*next];
                *next += 1;
                let node = *node;
                if parent.get(&node) == Some(&n) {
                    continue;
                }
                if visited.contains(&n) {
                    return Err(cycle_edges(&parent, node, n));
                }
                visited.insert(n);
                parent.insert(n, node);
                pre.push(n);
                let nn = neighbors(n);
                stack.push((n, nn, 0));
            } else {
                post.push(*node);
                stack.pop();
            }
        }
        for &n in &post {
            if let Some(&p) = parent.get(&n) {
                steps.push(directed(n, p));
            }
        }
        for &n in &pre {
            if let Some(&p) = parent.get(&n) {
                steps.push(directed(p, n));
            }
        }
    }
    Ok(steps)
}

fn directed(from: Node, to: Node) -> Step {
    match (from, to) {
        (Node::Var(v), Node::Factor(f)) => Step::to_factor(v, f),
        (Node::Factor(f), Node::Var(v)) => Step::to_variable(f, v),
        _ => unreachable!("graph is bipartite"),
    }
}

fn edge_of(a: Node, b: Node) -> (FactorId, VarId) {
    match (a, b) {
        (Node::Var(v), Node::Factor(f)) | (Node::Factor(f), Node::Var(v)) => (f, v),
        _ => unreachable!("graph is bipartite"),
    }
}

/// `ancestor` is on the DFS path to `node`; the cycle is that path segment
/// plus the closing back edge.
fn cycle_edges(parent: &HashMap<Node, Node>, node: Node, ancestor: Node) -> Vec<(FactorId, VarId)> {
    let mut edges = vec![edge_of(node, ancestor)];
    let mut cur = node;
    while cur != ancestor {
        let p = parent[&cur];
        edges.push(edge_of(cur, p));
        cur = p;
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DiscreteDomain;

    fn chain(n: usize) -> (FactorGraph, Vec<VarId>, Vec<FactorId>) {
        let mut g = FactorGraph::new();
        let v: Vec<VarId> = (0..n).map(|_| g.add_variable(&DiscreteDomain::bit())).collect();
        let f = (0..n - 1)
            .map(|i| g.add_factor_dense(|_| 1.0, &[v[i], v[i + 1]]).unwrap())
            .collect();
        (g, v, f)
    }

    #[test]
    fn flooding_single_factor() {
        let (g, v, f) = chain(2);
        let s = Schedule::flooding(&g).unwrap();
        assert_eq!(
            s.steps(),
            &[
                Step::to_factor(v[0], f[0]),
                Step::to_factor(v[1], f[0]),
                Step::to_variable(f[0], v[0]),
                Step::to_variable(f[0], v[1]),
            ]
        );
        assert_eq!(s, Schedule::flooding(&g).unwrap());
    }

    #[test]
    fn chain_counts() {
        let (g, _, _) = chain(3);
        assert_eq!(Schedule::flooding(&g).unwrap().len(), 8);
        let seq = Schedule::sequential(&g).unwrap();
        assert_eq!(seq.len(), 8);
        assert_eq!(seq.steps()[2].direction, Direction::ToVariable);
    }

    #[test]
    fn tree_on_path() {
        let (g, v, f) = chain(2);
        let s = Schedule::tree(&g).unwrap();
        assert_eq!(
            s.steps(),
            &[
                Step::to_factor(v[0], f[0]),
                Step::to_variable(f[0], v[1]),
                Step::to_factor(v[1], f[0]),
                Step::to_variable(f[0], v[0]),
            ]
        );
        assert!(!s.repeats());
    }

    #[test]
    fn tree_covers_every_directed_edge_once() {
        let (g, _, _) = chain(6);
        let s = Schedule::tree(&g).unwrap();
        assert_eq!(s.len(), 2 * g.edge_count());
        let unique: HashSet<Step> = s.steps().iter().copied().collect();
        assert_eq!(unique.len(), s.len());
    }

    #[test]
    fn four_cycle_rejected() {
        let mut g = FactorGraph::new();
        let v: Vec<VarId> = (0..4).map(|_| g.add_variable(&DiscreteDomain::bit())).collect();
        for i in 0..4 {
            g.add_factor_dense(|_| 1.0, &[v[i], v[(i + 1) % 4]]).unwrap();
        }
        match Schedule::tree(&g) {
            Err(ScheduleError::Cycle(edges)) => assert_eq!(edges.len(), 8),
            other => panic!("expected cycle, got {other:?}"),
        }
        assert_eq!(Schedule::default_for(&g).unwrap().kind(), ScheduleKind::Flooding);
    }

    #[test]
    fn empty_graph_errors() {
        let g = FactorGraph::new();
        assert_eq!(Schedule::flooding(&g), Err(ScheduleError::EmptyGraph));
        assert_eq!(Schedule::tree(&g), Err(ScheduleError::EmptyGraph));
        assert!(Schedule::custom(&g, vec![]).unwrap().is_empty());
    }

    #[test]
    fn custom_validation() {
        let (g, v, f) = chain(3);
        let ok = Schedule::custom(&g, vec![Step::to_factor(v[0], f[0])]).unwrap();
        assert_eq!(ok.len(), 1);
        // v2 is not attached to f0
        assert_eq!(
            Schedule::custom(&g, vec![Step::to_factor(v[2], f[0])]),
            Err(ScheduleError::DanglingEdge(f[0], v[2]))
        );
        assert!(Schedule::custom(&g, vec![Step::to_variable(FactorId(9), v[0])]).is_err());
        let json = Schedule::flooding(&g).unwrap().to_json().to_string();
        let parsed = Schedule::custom_from_json(&g, &json).unwrap();
        assert_eq!(parsed.steps(), Schedule::flooding(&g).unwrap().steps());
    }

    #[test]
    fn hierarchical_equals_flooding_without_nesting() {
        let (g, _, _) = chain(4);
        assert_eq!(
            Schedule::hierarchical(&g).unwrap().steps(),
            Schedule::flooding(&g).unwrap().steps()
        );
    }

    #[test]
    fn edge_index_lookup() {
        let (g, v, f) = chain(3);
        let idx = EdgeIndex::new(&g);
        assert_eq!(idx.len(), 4);
        assert_eq!(idx.find(f[1], v[2]), Some(3));
        assert_eq!(idx.find(f[0], v[2]), None);
        assert_eq!(idx.var_edges(v[1]), &[1, 2]);
    }
}
