#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use backdoor_core::graph::{CausalGraph, Edge, NodeName};
use backdoor_core::io::{parse_dag, DagDocument};
use backdoor_core::sem::{attach_weights, Coefficients, WeightedModel};
use proptest::prelude::*;

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn load_model(name: &str) -> WeightedModel {
    let DagDocument {
        graph, coefficients, ..
    } = parse_dag(&fixture(name)).unwrap();
    attach_weights(&graph, &coefficients.expect("fixture is weighted")).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// A standardized model built from an unstandardized linear SEM, together
/// with the correlation matrix computed directly from that SEM.
#[derive(Debug, Clone)]
pub struct Generated {
    pub model: WeightedModel,
    /// Correlations indexed by declaration order.
    pub oracle: Vec<Vec<f64>>,
}

impl Generated {
    pub fn graph(&self) -> &CausalGraph {
        self.model.graph()
    }

    pub fn name(&self, i: usize) -> &str {
        self.graph().nodes()[i].as_str()
    }
}

#[derive(Debug, Clone)]
pub struct RawSpec {
    /// `perm[i]` is the causal rank of the node declared at position `i`.
    perm: Vec<usize>,
    directed: Vec<bool>,
    bidirected: Vec<bool>,
    coef: Vec<f64>,
    error_sd: Vec<f64>,
    loading: Vec<(f64, f64)>,
}

const MAX_NODES: usize = 7;
const MAX_PAIRS: usize = MAX_NODES * (MAX_NODES - 1) / 2;

fn magnitude() -> impl Strategy<Value = f64> {
    (0.1f64..0.9, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m })
}

pub fn raw_spec(min_nodes: usize, max_nodes: usize, bidirected: bool) -> impl Strategy<Value = RawSpec> {
    (min_nodes..=max_nodes)
        .prop_flat_map(move |k| {
            (
                Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
                prop::collection::vec(prop::bool::weighted(0.5), MAX_PAIRS),
                prop::collection::vec(prop::bool::weighted(if bidirected { 0.2 } else { 0.0 }), MAX_PAIRS),
                prop::collection::vec(magnitude(), MAX_PAIRS),
                prop::collection::vec(0.5f64..1.5, MAX_NODES),
                prop::collection::vec((magnitude(), magnitude()), MAX_PAIRS),
            )
        })
        .prop_map(|(perm, directed, bidirected, coef, error_sd, loading)| RawSpec {
            perm,
            directed,
            bidirected,
            coef,
            error_sd,
            loading,
        })
}

pub fn generated(min_nodes: usize, max_nodes: usize, bidirected: bool) -> impl Strategy<Value = Generated> {
    raw_spec(min_nodes, max_nodes, bidirected).prop_map(|s| build(&s))
}

fn pair_index(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    // position of (a, b) among pairs of MAX_NODES in lexicographic order
    a * (2 * MAX_NODES - a - 1) / 2 + (b - a - 1)
}

/// Builds the raw SEM `x_v = sum b x_p + e_v` over causal ranks, then
/// standardizes it. Correlated errors come from one latent factor per
/// bidirected pair, so the raw error covariance is PSD by construction.
pub fn build(s: &RawSpec) -> Generated {
    let k = s.perm.len();
    let names: Vec<NodeName> = (0..k).map(|i| NodeName::new(format!("V{i}")).unwrap()).collect();
    // rank -> declared index
    let mut at_rank = vec![0; k];
    for (i, &r) in s.perm.iter().enumerate() {
        at_rank[r] = i;
    }

    let mut b = vec![vec![0.0; k]; k]; // b[child][parent], declared indices
    let mut omega = vec![vec![0.0; k]; k];
    for i in 0..k {
        omega[i][i] = s.error_sd[i] * s.error_sd[i];
    }
    let mut edges = Vec::new();
    let mut bidir_pairs = Vec::new();
    for ra in 0..k {
        for rb in ra + 1..k {
            let (u, v) = (at_rank[ra], at_rank[rb]);
            let p = pair_index(ra, rb);
            if s.directed[p] {
                b[v][u] = s.coef[p];
                edges.push(Edge::directed(names[u].clone(), names[v].clone()));
            } else if s.bidirected[p] {
                let (lu, lv) = s.loading[p];
                omega[u][u] += lu * lu;
                omega[v][v] += lv * lv;
                omega[u][v] += lu * lv;
                omega[v][u] += lu * lv;
                edges.push(Edge::bidirected(names[u].clone(), names[v].clone()));
                bidir_pairs.push((u, v));
            }
        }
    }

    // Each variable as a combination of error terms, built in causal order.
    let mut a = vec![vec![0.0; k]; k];
    for r in 0..k {
        let v = at_rank[r];
        a[v][v] = 1.0;
        for p in 0..k {
            if b[v][p] != 0.0 {
                for w in 0..k {
                    a[v][w] += b[v][p] * a[p][w];
                }
            }
        }
    }
    let cov = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for w in 0..k {
            for w2 in 0..k {
                s += a[i][w] * omega[w][w2] * a[j][w2];
            }
        }
        s
    };
    let sigma: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| cov(i, j)).collect()).collect();
    let sd: Vec<f64> = (0..k).map(|i| sigma[i][i].sqrt()).collect();
    let oracle = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { sigma[i][j] / (sd[i] * sd[j]) }).collect())
        .collect();

    let mut coefficients = Coefficients::new();
    for e in &edges {
        let s_idx = names.iter().position(|n| *n == e.source).unwrap();
        let t_idx = names.iter().position(|n| *n == e.target).unwrap();
        let value = if e.is_directed() {
            b[t_idx][s_idx] * sd[s_idx] / sd[t_idx]
        } else {
            omega[s_idx][t_idx] / (sd[s_idx] * sd[t_idx])
        };
        coefficients.insert(e.clone(), value);
    }
    let graph = CausalGraph::new(names, edges).unwrap();
    let model = attach_weights(&graph, &coefficients).expect("standardized raw SEM is feasible");
    Generated { model, oracle }
}

/// Partial correlation of `u` and `v` given `given`, from the inverse of the
/// relevant submatrix.
pub fn partial_correlation(r: &[Vec<f64>], u: usize, v: usize, given: &[usize]) -> f64 {
    let idx: Vec<usize> = [u, v].into_iter().chain(given.iter().copied()).collect();
    let m = nalgebra::DMatrix::from_fn(idx.len(), idx.len(), |i, j| r[idx[i]][idx[j]]);
    let p = m.try_inverse().expect("submatrix of a positive definite matrix");
    -p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt()
}
