//! Causal graph data model: named nodes joined by directed and bidirected
//! edges, validated acyclic on construction.
//!
//! Node declaration order is significant. It is the tie-breaker for every
//! deterministic listing the engine produces (orders, sets, report rows).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a variable: a letter or underscore followed by letters,
/// digits or underscores. Comparison is case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeName(String);

impl NodeName {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(NodeName(name))
        } else {
            Err(Error::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TryFrom<String> for NodeName {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        NodeName::new(value)
    }
}

impl TryFrom<&str> for NodeName {
    type Error = Error;
    fn try_from(value: &str) -> Result<Self> {
        NodeName::new(value)
    }
}

impl From<NodeName> for String {
    fn from(value: NodeName) -> Self {
        value.0
    }
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for NodeName {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for NodeName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Directed,
    Bidirected,
}

/// A directed edge `source -> target` or a bidirected edge `a <-> b`.
///
/// Bidirected edges are stored with endpoints in lexicographic order, so
/// `Edge::bidirected(a, b) == Edge::bidirected(b, a)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeName,
    pub target: NodeName,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn directed(source: NodeName, target: NodeName) -> Self {
        Edge {
            source,
            target,
            kind: EdgeKind::Directed,
        }
    }

    pub fn bidirected(a: NodeName, b: NodeName) -> Self {
        let (source, target) = if a <= b { (a, b) } else { (b, a) };
        Edge {
            source,
            target,
            kind: EdgeKind::Bidirected,
        }
    }

    /// Convenience constructor from string names; panics on invalid names.
    /// Intended for fixtures and tests.
    pub fn parse_directed(source: &str, target: &str) -> Self {
        Edge::directed(
            NodeName::new(source).expect("valid node name"),
            NodeName::new(target).expect("valid node name"),
        )
    }

    pub fn parse_bidirected(a: &str, b: &str) -> Self {
        Edge::bidirected(
            NodeName::new(a).expect("valid node name"),
            NodeName::new(b).expect("valid node name"),
        )
    }

    pub fn is_directed(&self) -> bool {
        self.kind == EdgeKind::Directed
    }

    fn canonical(self) -> Self {
        match self.kind {
            EdgeKind::Directed => self,
            EdgeKind::Bidirected => Edge::bidirected(self.source, self.target),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EdgeKind::Directed => write!(f, "{} -> {}", self.source, self.target),
            EdgeKind::Bidirected => write!(f, "{} <-> {}", self.source, self.target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Parents,
    Children,
    Ancestors,
    Descendants,
}

/// How a path step crosses an edge, seen from the node it leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traversal {
    /// Along a directed edge, `here -> next`.
    Forward,
    /// Against a directed edge, `here <- next`.
    Backward,
    /// Across a bidirected edge.
    Bidirected,
}

impl Traversal {
    /// Arrowhead at the node the step enters.
    pub fn head_at_next(self) -> bool {
        matches!(self, Traversal::Forward | Traversal::Bidirected)
    }

    /// Arrowhead at the node the step leaves.
    pub fn head_at_here(self) -> bool {
        matches!(self, Traversal::Backward | Traversal::Bidirected)
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Traversal::Forward => "->",
            Traversal::Backward => "<-",
            Traversal::Bidirected => "<->",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Adjacent {
    pub node: usize,
    pub edge: usize,
    pub via: Traversal,
}

/// A validated causal graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    nodes: Vec<NodeName>,
    index: HashMap<NodeName, usize>,
    edges: Vec<Edge>,
    ends: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    adjacency: Vec<Vec<Adjacent>>,
    order: Vec<usize>,
}

impl PartialEq for CausalGraph {
    /// Structural equality: same node order and the same edge set.
    fn eq(&self, other: &Self) -> bool {
        if self.nodes != other.nodes || self.edges.len() != other.edges.len() {
            return false;
        }
        let mine: HashSet<&Edge> = self.edges.iter().collect();
        other.edges.iter().all(|e| mine.contains(e))
    }
}

impl CausalGraph {
    /// Validates and builds a graph. Nodes keep the given order; edges may only
    /// reference declared nodes.
    pub fn new(nodes: Vec<NodeName>, edges: Vec<Edge>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateNode(n.to_string()));
            }
        }
        let n = nodes.len();
        let mut seen = HashSet::with_capacity(edges.len());
        let mut canonical = Vec::with_capacity(edges.len());
        let mut ends = Vec::with_capacity(edges.len());
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut adjacency = vec![Vec::new(); n];
        for edge in edges {
            let edge = edge.canonical();
            if edge.source == edge.target {
                return Err(Error::SelfLoop(edge.source.to_string()));
            }
            let s = *index
                .get(&edge.source)
                .ok_or_else(|| Error::UnknownNode(edge.source.to_string()))?;
            let t = *index
                .get(&edge.target)
                .ok_or_else(|| Error::UnknownNode(edge.target.to_string()))?;
            if !seen.insert(edge.clone()) {
                return Err(Error::DuplicateEdge(edge.to_string()));
            }
            let id = canonical.len();
            match edge.kind {
                EdgeKind::Directed => {
                    parents[t].push(s);
                    children[s].push(t);
                    adjacency[s].push(Adjacent { node: t, edge: id, via: Traversal::Forward });
                    adjacency[t].push(Adjacent { node: s, edge: id, via: Traversal::Backward });
                }
                EdgeKind::Bidirected => {
                    adjacency[s].push(Adjacent { node: t, edge: id, via: Traversal::Bidirected });
                    adjacency[t].push(Adjacent { node: s, edge: id, via: Traversal::Bidirected });
                }
            }
            ends.push((s, t));
            canonical.push(edge);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|a| (a.node, a.via));
        }
        let order = kahn_order(n, &parents, &children)
            .ok_or_else(|| Error::Cycle(find_cycle(&nodes, &children)))?;
        Ok(CausalGraph {
            nodes,
            index,
            edges: canonical,
            ends,
            parents,
            children,
            adjacency,
            order,
        })
    }

    /// Builds a graph from string names, declaring nodes in order of first
    /// appearance after the explicitly listed ones.
    pub fn from_names(nodes: &[&str], edges: Vec<Edge>) -> Result<Self> {
        let mut names: Vec<NodeName> = nodes.iter().map(|n| NodeName::new(*n)).collect::<Result<_>>()?;
        for e in &edges {
            for end in [&e.source, &e.target] {
                if !names.contains(end) {
                    names.push(end.clone());
                }
            }
        }
        CausalGraph::new(names, edges)
    }

    pub fn nodes(&self) -> &[NodeName] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn node(&self, i: usize) -> &NodeName {
        &self.nodes[i]
    }

    pub fn edge_index(&self, edge: &Edge) -> Option<usize> {
        let edge = edge.clone().canonical();
        self.edges.iter().position(|e| *e == edge)
    }

    pub(crate) fn edge_ends(&self, id: usize) -> (usize, usize) {
        self.ends[id]
    }

    pub(crate) fn parents_idx(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub(crate) fn adjacency(&self, v: usize) -> &[Adjacent] {
        &self.adjacency[v]
    }

    /// Topological order as indices (declaration order breaks ties).
    pub(crate) fn order_idx(&self) -> &[usize] {
        &self.order
    }

    pub fn has_bidirected(&self) -> bool {
        self.edges.iter().any(|e| e.kind == EdgeKind::Bidirected)
    }

    /// Nodes with no incoming directed edge.
    pub fn is_exogenous(&self, v: usize) -> bool {
        self.parents[v].is_empty()
    }

    /// Every directed edge runs from earlier to later in the returned list;
    /// among available nodes the earliest-declared one comes first.
    pub fn topological_order(&self) -> Vec<NodeName> {
        self.order.iter().map(|&i| self.nodes[i].clone()).collect()
    }

    /// Relatives along directed edges, listed in declaration order. Ancestors
    /// and descendants exclude `v` itself.
    pub fn relatives(&self, v: &str, relation: Relation) -> Result<Vec<NodeName>> {
        let i = self.index_of(v)?;
        let mask = match relation {
            Relation::Parents => to_mask(self.len(), &self.parents[i]),
            Relation::Children => to_mask(self.len(), &self.children[i]),
            Relation::Ancestors => {
                let mut m = self.reach(i, &self.parents);
                m[i] = false;
                m
            }
            Relation::Descendants => {
                let mut m = self.reach(i, &self.children);
                m[i] = false;
                m
            }
        };
        Ok(self.names_of(&mask))
    }

    /// Mask of `v` and everything reachable from it along `links`.
    fn reach(&self, v: usize, links: &[Vec<usize>]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for &w in &links[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// `v` together with all of its descendants.
    pub(crate) fn descendants_or_self(&self, v: usize) -> Vec<bool> {
        self.reach(v, &self.children)
    }

    /// `v` together with all of its ancestors.
    pub(crate) fn ancestors_or_self(&self, v: usize) -> Vec<bool> {
        self.reach(v, &self.parents)
    }

    pub(crate) fn names_of(&self, mask: &[bool]) -> Vec<NodeName> {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.nodes[i].clone())
            .collect()
    }

    /// Resolves names to indices, preserving the given order.
    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }

    /// A new graph with one more edge, validated as a whole.
    pub fn with_edge(&self, edge: Edge) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.push(edge);
        CausalGraph::new(self.nodes.clone(), edges)
    }

    pub fn without_edge(&self, edge: &Edge) -> Result<Self> {
        let id = self
            .edge_index(edge)
            .ok_or_else(|| Error::InvalidQuery(format!("edge {edge} is not in the graph")))?;
        let mut edges = self.edges.clone();
        edges.remove(id);
        CausalGraph::new(self.nodes.clone(), edges)
    }

    pub fn with_node(&self, name: NodeName) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        nodes.push(name);
        CausalGraph::new(nodes, self.edges.clone())
    }

    /// Removes a node and every edge touching it.
    pub fn without_node(&self, name: &str) -> Result<Self> {
        let i = self.index_of(name)?;
        let mut nodes = self.nodes.clone();
        nodes.remove(i);
        let edges = self
            .edges
            .iter()
            .filter(|e| e.source.as_str() != name && e.target.as_str() != name)
            .cloned()
            .collect();
        CausalGraph::new(nodes, edges)
    }
}

fn to_mask(n: usize, idx: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in idx {
        m[i] = true;
    }
    m
}

fn kahn_order(n: usize, parents: &[Vec<usize>], children: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &c in &children[u] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Finds one directed cycle; the first name is repeated at the end.
fn find_cycle(nodes: &[NodeName], children: &[Vec<usize>]) -> Vec<String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(u: usize, children: &[Vec<usize>], marks: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        marks[u] = Mark::Active;
        stack.push(u);
        for &c in &children[u] {
            match marks[c] {
                Mark::Active => {
                    let start = stack.iter().position(|&s| s == c).unwrap();
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(c);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(cycle) = visit(c, children, marks, stack) {
                        return Some(cycle);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[u] = Mark::Done;
        None
    }
    let mut marks = vec![Mark::New; nodes.len()];
    for s in 0..nodes.len() {
        if marks[s] == Mark::New {
            let mut stack = Vec::new();
            if let Some(cycle) = visit(s, children, &mut marks, &mut stack) {
                return cycle.into_iter().map(|i| nodes[i].to_string()).collect();
            }
        }
    }
    Vec::new()
}

impl Serialize for CausalGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            nodes: &'a [NodeName],
            edges: &'a [Edge],
        }
        Repr {
            nodes: &self.nodes,
            edges: &self.edges,
        }
        .serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[NodeName]) -> Vec<&str> {
        v.iter().map(NodeName::as_str).collect()
    }

    fn three_variable() -> CausalGraph {
        CausalGraph::from_names(
            &["X", "Y", "Z"],
            vec![
                Edge::parse_directed("X", "Z"),
                Edge::parse_directed("X", "Y"),
                Edge::parse_directed("Z", "Y"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn node_names_follow_identifier_rules() {
        assert!(NodeName::new("SE1").is_ok());
        assert!(NodeName::new("_x").is_ok());
        assert!(NodeName::new("1x").is_err());
        assert!(NodeName::new("").is_err());
        assert!(NodeName::new("a-b").is_err());
        assert_ne!(NodeName::new("a").unwrap(), NodeName::new("A").unwrap());
    }

    #[test]
    fn bidirected_edges_are_symmetric() {
        assert_eq!(Edge::parse_bidirected("P1", "SE1"), Edge::parse_bidirected("SE1", "P1"));
        assert_ne!(Edge::parse_directed("A", "B"), Edge::parse_directed("B", "A"));
    }

    #[test]
    fn builds_the_three_variable_graph() {
        let g = three_variable();
        assert_eq!(g.len(), 3);
        assert_eq!(names(&g.topological_order()), ["X", "Z", "Y"]);
    }

    #[test]
    fn rejects_two_cycle() {
        let err = CausalGraph::from_names(&[], vec![Edge::parse_directed("A", "B"), Edge::parse_directed("B", "A")])
            .unwrap_err();
        match err {
            Error::Cycle(c) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 3);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn bidirected_edges_never_form_cycles() {
        let g = CausalGraph::from_names(
            &["SE1", "P1", "SE2", "P2"],
            vec![
                Edge::parse_bidirected("SE1", "P1"),
                Edge::parse_directed("SE1", "P2"),
                Edge::parse_directed("P1", "P2"),
                Edge::parse_bidirected("SE2", "P2"),
            ],
        );
        assert!(g.is_ok());
    }

    #[test]
    fn structural_errors() {
        let a = NodeName::new("A").unwrap();
        let b = NodeName::new("B").unwrap();
        let c = NodeName::new("C").unwrap();
        assert!(matches!(
            CausalGraph::new(vec![a.clone()], vec![Edge::directed(a.clone(), a.clone())]),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(
            CausalGraph::new(vec![a.clone(), b.clone()], vec![Edge::directed(a.clone(), c.clone())]),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            CausalGraph::new(
                vec![a.clone(), b.clone()],
                vec![Edge::bidirected(a.clone(), b.clone()), Edge::bidirected(b.clone(), a.clone())]
            ),
            Err(Error::DuplicateEdge(_))
        ));
        assert!(matches!(
            CausalGraph::new(vec![a.clone(), a.clone()], vec![]),
            Err(Error::DuplicateNode(_))
        ));
    }

    #[test]
    fn edgeless_order_is_declaration_order() {
        let g = CausalGraph::from_names(&["B", "A"], vec![]).unwrap();
        assert_eq!(names(&g.topological_order()), ["B", "A"]);
    }

    #[test]
    fn relatives_of_three_variable_graph() {
        let g = three_variable();
        assert_eq!(names(&g.relatives("X", Relation::Descendants).unwrap()), ["Y", "Z"]);
        assert_eq!(names(&g.relatives("Y", Relation::Parents).unwrap()), ["X", "Z"]);
        assert_eq!(names(&g.relatives("Y", Relation::Ancestors).unwrap()), ["X", "Z"]);
        assert!(g.relatives("X", Relation::Parents).unwrap().is_empty());
        assert_eq!(names(&g.relatives("X", Relation::Children).unwrap()), ["Y", "Z"]);
        assert!(matches!(g.relatives("Q", Relation::Parents), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn edits_return_validated_snapshots() {
        let g = three_variable();
        assert!(matches!(g.with_edge(Edge::parse_directed("Y", "X")), Err(Error::Cycle(_))));
        let g2 = g.without_edge(&Edge::parse_directed("X", "Y")).unwrap();
        assert_eq!(g2.edges().len(), 2);
        let g3 = g.without_node("Z").unwrap();
        assert_eq!(g3.edges(), &[Edge::parse_directed("X", "Y")]);
    }
}
