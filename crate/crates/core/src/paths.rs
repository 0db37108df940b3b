//! Path enumeration, per-node role classification, d-separation of single
//! paths, backdoor paths and adjustment-set search.
//!
//! A bidirected edge `a <-> b` behaves like `a <- L -> b` for an implicit
//! latent `L`: it puts an arrowhead at both endpoints and is never a collider
//! itself.

use std::fmt;

use itertools::Itertools;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, NodeName, Traversal};

pub const DEFAULT_MAX_LEN: usize = 16;
pub const DEFAULT_PATH_CAP: usize = 100_000;
/// Largest number of candidate variables searched exhaustively for
/// adjustment sets.
pub const MAX_ADJUSTMENT_CANDIDATES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathLimits {
    /// Maximum number of edges on a path.
    pub max_len: usize,
    /// Maximum number of paths returned before failing with `PathExplosion`.
    pub cap: usize,
}

impl Default for PathLimits {
    fn default() -> Self {
        PathLimits {
            max_len: DEFAULT_MAX_LEN,
            cap: DEFAULT_PATH_CAP,
        }
    }
}

impl PathLimits {
    /// No length restriction beyond what a simple path allows in `g`.
    pub fn complete(g: &CausalGraph, cap: usize) -> Self {
        PathLimits {
            max_len: g.len().max(1),
            cap,
        }
    }
}

/// A simple path: `nodes[i]` and `nodes[i + 1]` are joined by an edge crossed
/// as `steps[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeName>,
    pub steps: Vec<Traversal>,
    pub(crate) idx: Vec<usize>,
    pub(crate) edge_ids: Vec<usize>,
}

impl Path {
    pub fn from(&self) -> &NodeName {
        &self.nodes[0]
    }

    pub fn to(&self) -> &NodeName {
        self.nodes.last().expect("paths have at least one edge")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Every step runs along its edge's direction.
    pub fn is_directed(&self) -> bool {
        self.steps.iter().all(|s| *s == Traversal::Forward)
    }

    /// No collider anywhere on the path.
    pub fn is_trek(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| !(w[0].head_at_next() && w[1].head_at_here()))
    }

    /// Starts with an arrowhead into its first node.
    pub fn is_backdoor(&self) -> bool {
        self.steps[0].head_at_here()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (step, node) in self.steps.iter().zip(&self.nodes[1..]) {
            write!(f, " {} {}", step.arrow(), node)?;
        }
        Ok(())
    }
}

impl Serialize for Path {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Path", 3)?;
        s.serialize_field("text", &self.to_string())?;
        s.serialize_field("nodes", &self.nodes)?;
        s.serialize_field("steps", &self.steps)?;
        s.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// One arrow in, one arrow out: a mediator on this path.
    Chain,
    /// Both arrows out: a common cause on this path.
    Fork,
    /// Both arrows in.
    Collider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeRole {
    pub node: NodeName,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    /// A chain or fork node that is adjusted for.
    AdjustedNonCollider,
    /// A collider with neither itself nor any descendant adjusted for.
    UnadjustedCollider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Blocker {
    pub node: NodeName,
    pub reason: BlockReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStatus {
    pub path: Path,
    pub roles: Vec<NodeRole>,
    pub open: bool,
    pub blockers: Vec<Blocker>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    Confounder,
    Mediator,
    Collider,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableRoles {
    pub node: NodeName,
    pub roles: Vec<VariableRole>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustmentReport {
    pub exposure: NodeName,
    pub outcome: NodeName,
    pub backdoor_paths: Vec<Path>,
    pub valid_sets: Vec<Vec<NodeName>>,
    pub minimal_sets: Vec<Vec<NodeName>>,
    pub variable_roles: Vec<VariableRoles>,
}

/// Role of an interior node given the steps entering and leaving it.
pub(crate) fn role_at(entering: Traversal, leaving: Traversal) -> Role {
    match (entering.head_at_next(), leaving.head_at_here()) {
        (true, true) => Role::Collider,
        (false, false) => Role::Fork,
        _ => Role::Chain,
    }
}

fn endpoints(g: &CausalGraph, from: &str, to: &str) -> Result<(usize, usize)> {
    let s = g.index_of(from)?;
    let t = g.index_of(to)?;
    if s == t {
        return Err(Error::InvalidQuery(format!("path endpoints must differ (`{from}`)")));
    }
    Ok((s, t))
}

/// Depth-first enumeration of simple paths `from -> to`. `allow(prev, next)`
/// decides whether a step may follow the previous one (`None` at the start).
/// Neighbours are visited in declaration order, so results come out in
/// lexicographic node-sequence order.
pub(crate) fn enumerate_paths<F>(g: &CausalGraph, from: usize, to: usize, limits: &PathLimits, allow: F) -> Result<Vec<Path>>
where
    F: Fn(Option<Traversal>, Traversal) -> bool,
{
    struct Walk<'a, F> {
        g: &'a CausalGraph,
        to: usize,
        limits: &'a PathLimits,
        allow: F,
        on_path: Vec<bool>,
        nodes: Vec<usize>,
        edges: Vec<usize>,
        steps: Vec<Traversal>,
        out: Vec<Path>,
    }

    impl<F: Fn(Option<Traversal>, Traversal) -> bool> Walk<'_, F> {
        fn step(&mut self, here: usize) -> Result<()> {
            if self.steps.len() >= self.limits.max_len {
                return Ok(());
            }
            let prev = self.steps.last().copied();
            for adj in self.g.adjacency(here) {
                if self.on_path[adj.node] || !(self.allow)(prev, adj.via) {
                    continue;
                }
                self.nodes.push(adj.node);
                self.edges.push(adj.edge);
                self.steps.push(adj.via);
                if adj.node == self.to {
                    if self.out.len() == self.limits.cap {
                        return Err(Error::PathExplosion { cap: self.limits.cap });
                    }
                    self.out.push(Path {
                        nodes: self.nodes.iter().map(|&i| self.g.node(i).clone()).collect(),
                        steps: self.steps.clone(),
                        idx: self.nodes.clone(),
                        edge_ids: self.edges.clone(),
                    });
                } else {
                    self.on_path[adj.node] = true;
                    self.step(adj.node)?;
                    self.on_path[adj.node] = false;
                }
                self.nodes.pop();
                self.edges.pop();
                self.steps.pop();
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        g,
        to,
        limits,
        allow,
        on_path: vec![false; g.len()],
        nodes: vec![from],
        edges: Vec::new(),
        steps: Vec::new(),
        out: Vec::new(),
    };
    walk.on_path[from] = true;
    walk.step(from)?;
    Ok(walk.out)
}

/// Every simple path between two nodes, edges crossed in either direction.
pub fn all_paths(g: &CausalGraph, from: &str, to: &str, limits: &PathLimits) -> Result<Vec<Path>> {
    let (s, t) = endpoints(g, from, to)?;
    if limits.max_len == 0 {
        return Err(Error::InvalidQuery("max path length must be at least 1".into()));
    }
    enumerate_paths(g, s, t, limits, |_, _| true)
}

/// Paths following edge directions from `from` to `to`.
pub fn directed_paths(g: &CausalGraph, from: &str, to: &str, limits: &PathLimits) -> Result<Vec<Path>> {
    let (s, t) = endpoints(g, from, to)?;
    enumerate_paths(g, s, t, limits, |_, next| next == Traversal::Forward)
}

/// Collider-free paths (treks) between two nodes. At most one bidirected edge
/// can appear on such a path.
pub fn treks(g: &CausalGraph, from: &str, to: &str, limits: &PathLimits) -> Result<Vec<Path>> {
    let (s, t) = endpoints(g, from, to)?;
    treks_idx(g, s, t, limits)
}

pub(crate) fn treks_idx(g: &CausalGraph, s: usize, t: usize, limits: &PathLimits) -> Result<Vec<Path>> {
    enumerate_paths(g, s, t, limits, |prev, next| {
        !matches!(prev, Some(p) if p.head_at_next() && next.head_at_here())
    })
}

/// Paths leaving the exposure through an arrowhead into it.
pub fn backdoor_paths(g: &CausalGraph, exposure: &str, outcome: &str, limits: &PathLimits) -> Result<Vec<Path>> {
    let (s, t) = endpoints(g, exposure, outcome)?;
    enumerate_paths(g, s, t, limits, |prev, next| prev.is_some() || next.head_at_here())
}

/// Interior roles of a path, one per interior node.
pub fn roles(p: &Path) -> Vec<NodeRole> {
    p.steps
        .windows(2)
        .zip(&p.nodes[1..])
        .map(|(w, node)| NodeRole {
            node: node.clone(),
            role: role_at(w[0], w[1]),
        })
        .collect()
}

/// Open/blocked status of a path given an adjustment set.
pub fn path_status<S: AsRef<str>>(g: &CausalGraph, p: &Path, adjusted: &[S]) -> Result<PathStatus> {
    let mut in_set = vec![false; g.len()];
    for a in g.indices_of(adjusted)? {
        in_set[a] = true;
    }
    for end in [p.from(), p.to()] {
        if in_set[g.index_of(end.as_str())?] {
            return Err(Error::InvalidQuery(format!("path endpoint `{end}` cannot be adjusted for")));
        }
    }
    let roles = roles(p);
    let mut blockers = Vec::new();
    for (nr, &i) in roles.iter().zip(&p.idx[1..]) {
        match nr.role {
            Role::Collider => {
                let opened = g
                    .descendants_or_self(i)
                    .iter()
                    .zip(&in_set)
                    .any(|(&d, &a)| d && a);
                if !opened {
                    blockers.push(Blocker {
                        node: nr.node.clone(),
                        reason: BlockReason::UnadjustedCollider,
                    });
                }
            }
            Role::Chain | Role::Fork => {
                if in_set[i] {
                    blockers.push(Blocker {
                        node: nr.node.clone(),
                        reason: BlockReason::AdjustedNonCollider,
                    });
                }
            }
        }
    }
    Ok(PathStatus {
        path: p.clone(),
        roles,
        open: blockers.is_empty(),
        blockers,
    })
}

/// `true` when every path between `u` and `v` is blocked by `adjusted`.
pub fn d_separated<S: AsRef<str>>(g: &CausalGraph, u: &str, v: &str, adjusted: &[S], cap: usize) -> Result<bool> {
    let limits = PathLimits::complete(g, cap);
    for p in all_paths(g, u, v, &limits)? {
        if path_status(g, &p, adjusted)?.open {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A path reduced to what blocking depends on.
struct BlockProfile {
    non_colliders: Vec<usize>,
    /// For each collider, the collider and its descendants.
    colliders: Vec<Vec<usize>>,
}

impl BlockProfile {
    fn new(g: &CausalGraph, p: &Path) -> Self {
        let mut non_colliders = Vec::new();
        let mut colliders = Vec::new();
        for (w, &i) in p.steps.windows(2).zip(&p.idx[1..]) {
            match role_at(w[0], w[1]) {
                Role::Collider => colliders.push(
                    g.descendants_or_self(i)
                        .iter()
                        .enumerate()
                        .filter(|(_, &d)| d)
                        .map(|(j, _)| j)
                        .collect(),
                ),
                _ => non_colliders.push(i),
            }
        }
        BlockProfile { non_colliders, colliders }
    }

    fn blocked(&self, in_set: &[bool]) -> bool {
        self.non_colliders.iter().any(|&i| in_set[i])
            || self.colliders.iter().any(|ds| !ds.iter().any(|&d| in_set[d]))
    }
}

/// Backdoor adjustment sets for estimating the effect of `exposure` on
/// `outcome`: every valid set, the inclusion-minimal ones, and the role each
/// other variable plays.
pub fn adjustment_sets(g: &CausalGraph, exposure: &str, outcome: &str, cap: usize) -> Result<AdjustmentReport> {
    let (x, y) = endpoints(g, exposure, outcome)?;
    let limits = PathLimits::complete(g, cap);
    let descendants = g.descendants_or_self(x);
    let candidates: Vec<usize> = (0..g.len()).filter(|&i| i != y && !descendants[i]).collect();
    if candidates.len() > MAX_ADJUSTMENT_CANDIDATES {
        return Err(Error::GraphTooLarge {
            candidates: candidates.len(),
            limit: MAX_ADJUSTMENT_CANDIDATES,
        });
    }

    let backdoor = backdoor_paths(g, exposure, outcome, &limits)?;
    let profiles: Vec<BlockProfile> = backdoor.iter().map(|p| BlockProfile::new(g, p)).collect();

    let mut valid: Vec<Vec<usize>> = Vec::new();
    let mut minimal: Vec<Vec<usize>> = Vec::new();
    let mut in_set = vec![false; g.len()];
    for k in 0..=candidates.len() {
        for subset in candidates.iter().copied().combinations(k) {
            subset.iter().for_each(|&i| in_set[i] = true);
            let ok = profiles.iter().all(|p| p.blocked(&in_set));
            subset.iter().for_each(|&i| in_set[i] = false);
            if !ok {
                continue;
            }
            if !minimal.iter().any(|m| m.iter().all(|i| subset.contains(i))) {
                minimal.push(subset.clone());
            }
            valid.push(subset);
        }
    }
    if valid.is_empty() {
        return Err(Error::NoValidSet {
            exposure: exposure.to_string(),
            outcome: outcome.to_string(),
        });
    }

    let variable_roles = classify_variables(g, x, y, &backdoor, &limits)?;
    let to_names = |sets: Vec<Vec<usize>>| -> Vec<Vec<NodeName>> {
        sets.into_iter()
            .map(|s| s.into_iter().map(|i| g.node(i).clone()).collect())
            .collect()
    };
    Ok(AdjustmentReport {
        exposure: g.node(x).clone(),
        outcome: g.node(y).clone(),
        backdoor_paths: backdoor,
        valid_sets: to_names(valid),
        minimal_sets: to_names(minimal),
        variable_roles,
    })
}

fn classify_variables(
    g: &CausalGraph,
    x: usize,
    y: usize,
    backdoor: &[Path],
    limits: &PathLimits,
) -> Result<Vec<VariableRoles>> {
    let n = g.len();
    let mut confounder = vec![false; n];
    let mut mediator = vec![false; n];
    let mut collider = vec![false; n];
    for p in backdoor {
        for (w, &i) in p.steps.windows(2).zip(&p.idx[1..]) {
            if role_at(w[0], w[1]) != Role::Collider {
                confounder[i] = true;
            }
        }
    }
    for p in enumerate_paths(g, x, y, limits, |_, next| next == Traversal::Forward)? {
        for &i in &p.idx[1..p.idx.len() - 1] {
            mediator[i] = true;
        }
    }
    for p in enumerate_paths(g, x, y, limits, |_, _| true)? {
        for (w, &i) in p.steps.windows(2).zip(&p.idx[1..]) {
            if role_at(w[0], w[1]) == Role::Collider {
                collider[i] = true;
            }
        }
    }
    Ok((0..n)
        .filter(|&i| i != x && i != y)
        .map(|i| {
            let mut roles = Vec::new();
            if confounder[i] {
                roles.push(VariableRole::Confounder);
            }
            if mediator[i] {
                roles.push(VariableRole::Mediator);
            }
            if collider[i] {
                roles.push(VariableRole::Collider);
            }
            if roles.is_empty() {
                roles.push(VariableRole::Neutral);
            }
            VariableRoles {
                node: g.node(i).clone(),
                roles,
            }
        })
        .collect())
}
