//! Acyclic orientations of an undirected skeleton, each fitted to the same
//! correlation matrix, with per-model effect tables.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit, FitResult};
use crate::graph::{CausalGraph, Edge, NodeName};
use crate::sem::{total_effect, CorrelationMatrix};

pub const DEFAULT_ORIENTATION_CAP: usize = 50_000;
pub const MAX_COMPLETE_NODES: usize = 7;

/// Undirected node pairs over declared nodes. Pair order is the reference
/// orientation: orientation enumeration counts reversals against it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skeleton {
    nodes: Vec<NodeName>,
    pairs: Vec<(NodeName, NodeName)>,
}

impl Skeleton {
    pub fn new(nodes: Vec<NodeName>, pairs: Vec<(NodeName, NodeName)>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::DuplicateNode(n.to_string()));
            }
        }
        let mut seen = BTreeSet::new();
        for (a, b) in &pairs {
            if a == b {
                return Err(Error::InvalidSkeleton(format!("self-pair on `{a}`")));
            }
            for n in [a, b] {
                if !nodes.contains(n) {
                    return Err(Error::UnknownNode(n.to_string()));
                }
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(Error::InvalidSkeleton(format!("pair {a} - {b} listed twice")));
            }
        }
        Ok(Skeleton { nodes, pairs })
    }

    /// Every pair of `nodes`, in declaration order.
    pub fn complete(nodes: Vec<NodeName>) -> Result<Self> {
        if nodes.len() > MAX_COMPLETE_NODES {
            return Err(Error::InvalidSkeleton(format!(
                "complete skeletons are limited to {MAX_COMPLETE_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        let pairs = nodes.iter().cloned().tuple_combinations().collect();
        Skeleton::new(nodes, pairs)
    }

    pub fn nodes(&self) -> &[NodeName] {
        &self.nodes
    }

    pub fn pairs(&self) -> &[(NodeName, NodeName)] {
        &self.pairs
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = self.pairs.iter().map(|(a, b)| format!("{a}-{b}")).join(",");
        let isolated: Vec<&NodeName> = self
            .nodes
            .iter()
            .filter(|n| !self.pairs.iter().any(|(a, b)| a == *n || b == *n))
            .collect();
        write!(f, "{pairs}")?;
        for n in isolated {
            write!(f, ",{n}")?;
        }
        Ok(())
    }
}

/// Accepts `complete:A,B,C` or a comma-separated list of `A-B` pairs, where
/// a bare name declares an isolated node.
impl FromStr for Skeleton {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let name = |t: &str| NodeName::new(t.trim());
        if let Some(rest) = s.strip_prefix("complete:") {
            let nodes = rest.split(',').map(name).collect::<Result<Vec<_>>>()?;
            return Skeleton::complete(nodes);
        }
        let mut nodes: Vec<NodeName> = Vec::new();
        let mut pairs = Vec::new();
        let mut declare = |n: &NodeName| {
            if !nodes.contains(n) {
                nodes.push(n.clone());
            }
        };
        for item in s.split(',').map(str::trim) {
            match item.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (name(a)?, name(b)?);
                    declare(&a);
                    declare(&b);
                    pairs.push((a, b));
                }
                None => declare(&name(item)?),
            }
        }
        Skeleton::new(nodes, pairs)
    }
}

fn is_acyclic(k: usize, arcs: &[(usize, usize)]) -> bool {
    let mut indegree = vec![0usize; k];
    let mut out = vec![Vec::new(); k];
    for &(s, t) in arcs {
        indegree[t] += 1;
        out[s].push(t);
    }
    let mut queue: VecDeque<usize> = (0..k).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    seen == k
}

/// Every acyclic orientation exactly once, ordered by how many pairs are
/// reversed relative to the skeleton's listing, then lexicographically by
/// the positions of the reversed pairs.
pub fn enumerate_orientations(skeleton: &Skeleton, cap: usize) -> Result<Vec<CausalGraph>> {
    if cap == 0 {
        return Err(Error::InvalidQuery("orientation cap must be at least 1".into()));
    }
    let pos = |n: &NodeName| skeleton.nodes.iter().position(|m| m == n).expect("validated");
    let base: Vec<(usize, usize)> = skeleton.pairs.iter().map(|(a, b)| (pos(a), pos(b))).collect();
    let m = base.len();
    let mut out = Vec::new();
    for k in 0..=m {
        for reversed in (0..m).combinations(k) {
            let mut arcs = base.clone();
            for &i in &reversed {
                arcs[i] = (arcs[i].1, arcs[i].0);
            }
            if !is_acyclic(skeleton.nodes.len(), &arcs) {
                continue;
            }
            if out.len() == cap {
                return Err(Error::TooManyOrientations { cap });
            }
            let edges = arcs
                .iter()
                .map(|&(s, t)| Edge::directed(skeleton.nodes[s].clone(), skeleton.nodes[t].clone()))
                .collect();
            out.push(CausalGraph::new(skeleton.nodes.clone(), edges)?);
        }
    }
    Ok(out)
}

/// Topological order signature, e.g. `A<B<C`.
pub fn orientation_label(g: &CausalGraph) -> String {
    g.topological_order().iter().join("<")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectQuery {
    pub exposure: NodeName,
    pub outcome: NodeName,
    pub fixed: Vec<NodeName>,
}

impl EffectQuery {
    pub fn new(exposure: &str, outcome: &str, fixed: &[&str]) -> Result<Self> {
        Ok(EffectQuery {
            exposure: NodeName::new(exposure)?,
            outcome: NodeName::new(outcome)?,
            fixed: fixed.iter().map(|f| NodeName::new(*f)).collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryEffect {
    pub exposure: NodeName,
    pub outcome: NodeName,
    pub fixed: Vec<NodeName>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumeratedModel {
    /// 1-based position in enumeration order.
    pub id: usize,
    pub label: String,
    pub fit: FitResult,
    pub effects: Vec<QueryEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerationResult {
    pub skeleton: Skeleton,
    pub models: Vec<EnumeratedModel>,
}

fn check_query(skeleton: &Skeleton, q: &EffectQuery) -> Result<()> {
    if q.exposure == q.outcome {
        return Err(Error::InvalidQuery(format!("exposure and outcome are both `{}`", q.exposure)));
    }
    for n in std::iter::once(&q.exposure).chain([&q.outcome]).chain(&q.fixed) {
        if !skeleton.nodes.contains(n) {
            return Err(Error::UnknownNode(n.to_string()));
        }
    }
    Ok(())
}

/// Fits every acyclic orientation of `skeleton` to `r` and evaluates the
/// queried total effects in each.
pub fn enumerate_and_fit(
    skeleton: &Skeleton,
    r: &CorrelationMatrix,
    queries: &[EffectQuery],
    cap: usize,
) -> Result<EnumerationResult> {
    for q in queries {
        check_query(skeleton, q)?;
    }
    for n in &skeleton.nodes {
        r.index_of(n.as_str())?;
    }
    let graphs = enumerate_orientations(skeleton, cap)?;
    let models = graphs
        .into_par_iter()
        .enumerate()
        .map(|(i, g)| {
            let fitted = fit(&g, r)?;
            let effects = queries
                .iter()
                .map(|q| {
                    let fixed: Vec<&str> = q.fixed.iter().map(NodeName::as_str).collect();
                    let report = total_effect(&fitted.model, q.exposure.as_str(), q.outcome.as_str(), &fixed)?;
                    Ok(QueryEffect {
                        exposure: q.exposure.clone(),
                        outcome: q.outcome.clone(),
                        fixed: q.fixed.clone(),
                        total: report.total,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EnumeratedModel {
                id: i + 1,
                label: orientation_label(&g),
                fit: fitted,
                effects,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnumerationResult {
        skeleton: skeleton.clone(),
        models,
    })
}
