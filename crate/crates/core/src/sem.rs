//! Linear path models on standardized variables: weighting a graph,
//! implied correlations (matrix algebra and path tracing), regressions,
//! effect and correlation decompositions, and graph surgery for
//! interventions.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Edge, EdgeKind, NodeName, Traversal};
use crate::paths::{enumerate_paths, treks_idx, Path, PathLimits, DEFAULT_PATH_CAP};

/// Coefficient per edge: path coefficients for directed edges, error
/// covariances for bidirected ones (both on the standardized scale).
pub type Coefficients = BTreeMap<Edge, f64>;

/// Tolerance below which a computed error variance counts as negative.
pub const VARIANCE_TOLERANCE: f64 = 1e-8;
/// Smallest eigenvalue accepted for a positive semidefinite matrix.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// Tolerance for symmetry, unit diagonal and range checks on correlations.
pub const CORRELATION_TOLERANCE: f64 = 1e-9;
/// Predictor matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().symmetric_eigenvalues().min()
}

/// Symmetric, unit-diagonal, positive semidefinite matrix keyed by node names.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    names: Vec<NodeName>,
    values: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates a square matrix given row by row.
    pub fn new(names: Vec<NodeName>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = names.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidQuery(format!("correlation matrix must be {n}x{n}")));
        }
        let values = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(names, values)
    }

    pub(crate) fn from_matrix(names: Vec<NodeName>, values: DMatrix<f64>) -> Result<Self> {
        let n = names.len();
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::DuplicateNode(a.to_string()));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + CORRELATION_TOLERANCE {
                    return Err(Error::OutOfRange {
                        row: names[i].to_string(),
                        col: names[j].to_string(),
                        value: v,
                    });
                }
                if (v - values[(j, i)]).abs() > CORRELATION_TOLERANCE {
                    return Err(Error::NotSymmetric {
                        row: names[i].to_string(),
                        col: names[j].to_string(),
                    });
                }
            }
            if (values[(i, i)] - 1.0).abs() > CORRELATION_TOLERANCE {
                return Err(Error::NotUnitDiagonal(names[i].to_string()));
            }
        }
        let min_eigenvalue = min_eigenvalue(&values);
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(CorrelationMatrix { names, values })
    }

    pub fn identity(names: Vec<NodeName>) -> Self {
        let n = names.len();
        CorrelationMatrix {
            names,
            values: DMatrix::identity(n, n),
        }
    }

    pub fn names(&self) -> &[NodeName] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n.as_str() == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.values[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.values[(i, j)]).collect())
            .collect()
    }

    pub(crate) fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Largest absolute entrywise difference over the variables of `self`.
    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> Result<f64> {
        let idx = self
            .names
            .iter()
            .map(|n| other.index_of(n.as_str()))
            .collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for (i, &oi) in idx.iter().enumerate() {
            for (j, &oj) in idx.iter().enumerate() {
                worst = worst.max((self.values[(i, j)] - other.values[(oi, oj)]).abs());
            }
        }
        Ok(worst)
    }
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            names: &'a [NodeName],
            values: Vec<Vec<f64>>,
        }
        Repr {
            names: &self.names,
            values: self.rows(),
        }
        .serialize(serializer)
    }
}

/// A causal graph with coefficients and the error variances that give every
/// variable unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedModel {
    graph: CausalGraph,
    coef: Vec<f64>,
    error_var: Vec<f64>,
}

impl WeightedModel {
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn coefficient(&self, edge: &Edge) -> Option<f64> {
        self.graph.edge_index(edge).map(|i| self.coef[i])
    }

    pub fn coefficients(&self) -> Coefficients {
        self.graph.edges().iter().cloned().zip(self.coef.iter().copied()).collect()
    }

    /// Coefficients aligned with `graph().edges()`.
    pub fn coefficient_list(&self) -> &[f64] {
        &self.coef
    }

    pub fn error_var(&self, node: &str) -> Result<f64> {
        Ok(self.error_var[self.graph.index_of(node)?])
    }

    pub fn error_vars(&self) -> &[f64] {
        &self.error_var
    }

    /// Path-coefficient matrix `B` with `B[child, parent] = beta`.
    fn coefficient_matrix(&self) -> DMatrix<f64> {
        coefficient_matrix(&self.graph, &self.coef)
    }

    /// Full error covariance: derived variances on the diagonal, bidirected
    /// coefficients off it.
    pub(crate) fn error_covariance(&self) -> DMatrix<f64> {
        let mut omega = bidirected_matrix(&self.graph, &self.coef);
        for (i, v) in self.error_var.iter().enumerate() {
            omega[(i, i)] = *v;
        }
        omega
    }

    /// Product of coefficients along a path of this model's graph.
    pub fn path_product(&self, p: &Path) -> f64 {
        p.edge_ids.iter().map(|&e| self.coef[e]).product()
    }
}

impl Serialize for WeightedModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct WeightedEdge<'a> {
            source: &'a NodeName,
            target: &'a NodeName,
            kind: EdgeKind,
            coef: f64,
        }
        #[derive(Serialize)]
        struct ErrorVar<'a> {
            node: &'a NodeName,
            value: f64,
        }
        #[derive(Serialize)]
        struct Repr<'a> {
            nodes: &'a [NodeName],
            edges: Vec<WeightedEdge<'a>>,
            error_var: Vec<ErrorVar<'a>>,
        }
        Repr {
            nodes: self.graph.nodes(),
            edges: self
                .graph
                .edges()
                .iter()
                .zip(&self.coef)
                .map(|(e, &coef)| WeightedEdge {
                    source: &e.source,
                    target: &e.target,
                    kind: e.kind,
                    coef,
                })
                .collect(),
            error_var: self
                .graph
                .nodes()
                .iter()
                .zip(&self.error_var)
                .map(|(node, &value)| ErrorVar { node, value })
                .collect(),
        }
        .serialize(serializer)
    }
}

fn coefficient_matrix(g: &CausalGraph, coef: &[f64]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(g.len(), g.len());
    for (id, e) in g.edges().iter().enumerate() {
        if e.kind == EdgeKind::Directed {
            let (s, t) = g.edge_ends(id);
            b[(t, s)] = coef[id];
        }
    }
    b
}

fn bidirected_matrix(g: &CausalGraph, coef: &[f64]) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(g.len(), g.len());
    for (id, e) in g.edges().iter().enumerate() {
        if e.kind == EdgeKind::Bidirected {
            let (s, t) = g.edge_ends(id);
            omega[(s, t)] += coef[id];
            omega[(t, s)] += coef[id];
        }
    }
    omega
}

/// `(I - B)^-1`: entry `(v, w)` is the total effect of `w` on `v`.
/// Computed by forward substitution in topological order.
fn total_effect_matrix(g: &CausalGraph, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.len();
    let mut t = DMatrix::zeros(n, n);
    for &v in g.order_idx() {
        t[(v, v)] = 1.0;
        for &p in g.parents_idx(v) {
            let beta = b[(v, p)];
            for w in 0..n {
                t[(v, w)] += beta * t[(p, w)];
            }
        }
    }
    t
}

/// Attaches coefficients to a graph and derives each node's error variance
/// so that every variable has unit variance.
pub fn attach_weights(g: &CausalGraph, coefficients: &Coefficients) -> Result<WeightedModel> {
    let mut coef = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        let c = *coefficients
            .get(e)
            .ok_or_else(|| Error::MissingCoefficient(e.to_string()))?;
        if !c.is_finite() {
            return Err(Error::NonFiniteCoefficient(e.to_string()));
        }
        coef.push(c);
    }
    if let Some(stray) = coefficients.keys().find(|e| g.edge_index(e).is_none()) {
        return Err(Error::StrayCoefficient(stray.to_string()));
    }

    let n = g.len();
    let b = coefficient_matrix(g, &coef);
    let t = total_effect_matrix(g, &b);
    let mut omega = bidirected_matrix(g, &coef);
    let mut error_var = vec![0.0; n];
    // Var(v) = sum_{w,w'} T[v,w] Omega[w,w'] T[v,w']. Only ancestors of v
    // (and v) contribute, and their variances are already known.
    for &v in g.order_idx() {
        let mut explained = 0.0;
        for w in 0..n {
            let tw = t[(v, w)];
            if tw == 0.0 {
                continue;
            }
            for u in 0..n {
                if w == v && u == v {
                    continue;
                }
                explained += tw * omega[(w, u)] * t[(v, u)];
            }
        }
        let residual = 1.0 - explained;
        if residual < -VARIANCE_TOLERANCE {
            return Err(Error::InfeasibleStandardization {
                node: g.node(v).to_string(),
                error_var: residual,
            });
        }
        let residual = residual.max(0.0);
        omega[(v, v)] = residual;
        error_var[v] = residual;
    }

    let min_eigenvalue = min_eigenvalue(&omega);
    if min_eigenvalue < -PSD_TOLERANCE {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    Ok(WeightedModel {
        graph: g.clone(),
        coef,
        error_var,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpliedMethod {
    /// `(I - B)^-1 Omega (I - B)^-T`.
    Matrix,
    /// Sum of coefficient products over every trek.
    Tracing,
}

/// Correlation matrix the model implies, rows in node declaration order.
pub fn implied_correlations(m: &WeightedModel, method: ImpliedMethod) -> Result<CorrelationMatrix> {
    implied_correlations_capped(m, method, DEFAULT_PATH_CAP)
}

pub fn implied_correlations_capped(m: &WeightedModel, method: ImpliedMethod, cap: usize) -> Result<CorrelationMatrix> {
    let g = m.graph();
    let n = g.len();
    let mut values = match method {
        ImpliedMethod::Matrix => {
            let t = total_effect_matrix(g, &m.coefficient_matrix());
            &t * m.error_covariance() * t.transpose()
        }
        ImpliedMethod::Tracing => {
            let limits = PathLimits::complete(g, cap);
            let mut r = DMatrix::identity(n, n);
            for u in 0..n {
                for v in (u + 1)..n {
                    let sum: f64 = treks_idx(g, u, v, &limits)?.iter().map(|p| m.path_product(p)).sum();
                    r[(u, v)] = sum;
                    r[(v, u)] = sum;
                }
            }
            r
        }
    };
    values = (&values + values.transpose()) * 0.5;
    CorrelationMatrix::from_matrix(g.nodes().to_vec(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionCoefficient {
    pub predictor: NodeName,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub outcome: NodeName,
    /// In the order the predictors were given.
    pub coefficients: Vec<RegressionCoefficient>,
    pub r_squared: f64,
}

impl RegressionResult {
    pub fn beta(&self, predictor: &str) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|c| c.predictor.as_str() == predictor)
            .map(|c| c.beta)
    }
}

/// Standardized least-squares regression from a correlation matrix: solves
/// the normal equations `R_pp beta = r_py`.
pub fn regress<S: AsRef<str>>(r: &CorrelationMatrix, outcome: &str, predictors: &[S]) -> Result<RegressionResult> {
    let y = r.index_of(outcome)?;
    let xs = predictors
        .iter()
        .map(|p| r.index_of(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    for (k, &x) in xs.iter().enumerate() {
        if x == y {
            return Err(Error::InvalidRegression(format!("`{outcome}` cannot predict itself")));
        }
        if xs[..k].contains(&x) {
            return Err(Error::InvalidRegression(format!(
                "predictor `{}` listed twice",
                predictors[k].as_ref()
            )));
        }
    }
    let beta = solve_normal_equations(r.matrix(), y, &xs)?;
    let r_squared = beta.iter().zip(&xs).map(|(b, &x)| b * r.at(y, x)).sum();
    Ok(RegressionResult {
        outcome: r.names()[y].clone(),
        coefficients: xs
            .iter()
            .zip(beta)
            .map(|(&x, beta)| RegressionCoefficient {
                predictor: r.names()[x].clone(),
                beta,
            })
            .collect(),
        r_squared,
    })
}

pub(crate) fn solve_normal_equations(r: &DMatrix<f64>, y: usize, xs: &[usize]) -> Result<Vec<f64>> {
    let k = xs.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let rxx = DMatrix::from_fn(k, k, |i, j| r[(xs[i], xs[j])]);
    let rxy = nalgebra::DVector::from_fn(k, |i, _| r[(xs[i], y)]);
    let singular = rxx.clone().singular_values();
    let (hi, lo) = (singular.max(), singular.min());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::SingularPredictors { condition });
    }
    let beta = rxx
        .lu()
        .solve(&rxy)
        .ok_or(Error::SingularPredictors { condition })?;
    Ok(beta.iter().copied().collect())
}

/// The regression the model predicts on infinite data.
pub fn expected_regression<S: AsRef<str>>(m: &WeightedModel, outcome: &str, predictors: &[S]) -> Result<RegressionResult> {
    let r = implied_correlations(m, ImpliedMethod::Matrix)?;
    regress(&r, outcome, predictors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Causal,
    NonCausal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathContribution {
    pub path: Path,
    pub product: f64,
    pub kind: PathKind,
}

/// Causal effect of `exposure` on `outcome`, or a decomposition of their
/// correlation. For decompositions `non_causal` and `correlation` are set and
/// `per_path` lists every trek; otherwise only causal paths are listed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectReport {
    pub exposure: NodeName,
    pub outcome: NodeName,
    /// Nodes held fixed by intervention (paths through them are cut).
    pub fixed: Vec<NodeName>,
    pub total: f64,
    pub direct: f64,
    pub indirect: f64,
    pub non_causal: Option<f64>,
    pub correlation: Option<f64>,
    pub per_path: Vec<PathContribution>,
}

fn direct_coefficient(m: &WeightedModel, x: usize, y: usize) -> f64 {
    let g = m.graph();
    g.edges()
        .iter()
        .enumerate()
        .find(|(id, e)| e.kind == EdgeKind::Directed && g.edge_ends(*id) == (x, y))
        .map(|(id, _)| m.coef[id])
        .unwrap_or(0.0)
}

fn distinct_pair(g: &CausalGraph, a: &str, b: &str) -> Result<(usize, usize)> {
    let x = g.index_of(a)?;
    let y = g.index_of(b)?;
    if x == y {
        return Err(Error::InvalidQuery(format!("`{a}` appears as both endpoints")));
    }
    Ok((x, y))
}

/// Total effect as the sum over directed paths that avoid every `fixed` node.
/// Holding a node fixed cuts the paths through it; it is not adjustment.
pub fn total_effect<S: AsRef<str>>(m: &WeightedModel, exposure: &str, outcome: &str, fixed: &[S]) -> Result<EffectReport> {
    let g = m.graph();
    let (x, y) = distinct_pair(g, exposure, outcome)?;
    let fixed_idx = g.indices_of(fixed)?;
    if fixed_idx.contains(&x) || fixed_idx.contains(&y) {
        return Err(Error::InvalidQuery("the exposure and outcome cannot be held fixed".into()));
    }
    let limits = PathLimits::complete(g, DEFAULT_PATH_CAP);
    let paths = enumerate_paths(g, x, y, &limits, |_, next| next == Traversal::Forward)?;
    let per_path: Vec<PathContribution> = paths
        .into_iter()
        .filter(|p| !p.idx.iter().any(|i| fixed_idx.contains(i)))
        .map(|p| PathContribution {
            product: m.path_product(&p),
            path: p,
            kind: PathKind::Causal,
        })
        .collect();
    let total: f64 = per_path.iter().map(|c| c.product).sum();
    let direct = direct_coefficient(m, x, y);
    let mut fixed_sorted = fixed_idx;
    fixed_sorted.sort_unstable();
    fixed_sorted.dedup();
    Ok(EffectReport {
        exposure: g.node(x).clone(),
        outcome: g.node(y).clone(),
        fixed: fixed_sorted.into_iter().map(|i| g.node(i).clone()).collect(),
        total,
        direct,
        indirect: total - direct,
        non_causal: None,
        correlation: None,
        per_path,
    })
}

/// Splits the implied correlation of `u` and `v` into the causal part
/// (directed paths `u -> ... -> v`) and the non-causal remainder.
pub fn correlation_decomposition(m: &WeightedModel, u: &str, v: &str) -> Result<EffectReport> {
    let g = m.graph();
    let (x, y) = distinct_pair(g, u, v)?;
    let limits = PathLimits::complete(g, DEFAULT_PATH_CAP);
    let per_path: Vec<PathContribution> = treks_idx(g, x, y, &limits)?
        .into_iter()
        .map(|p| PathContribution {
            product: m.path_product(&p),
            kind: if p.is_directed() { PathKind::Causal } else { PathKind::NonCausal },
            path: p,
        })
        .collect();
    let sum_of = |kind| -> f64 {
        per_path.iter().filter(|c| c.kind == kind).map(|c| c.product).sum()
    };
    let total = sum_of(PathKind::Causal);
    let non_causal = sum_of(PathKind::NonCausal);
    let direct = direct_coefficient(m, x, y);
    Ok(EffectReport {
        exposure: g.node(x).clone(),
        outcome: g.node(y).clone(),
        fixed: Vec::new(),
        total,
        direct,
        indirect: total - direct,
        non_causal: Some(non_causal),
        correlation: Some(total + non_causal),
        per_path,
    })
}

/// Edges an intervention on `target` removes: directed edges into it and
/// bidirected edges touching it.
fn surgery_edges(g: &CausalGraph, target: usize) -> Vec<usize> {
    (0..g.edges().len())
        .filter(|&id| {
            let (s, t) = g.edge_ends(id);
            match g.edges()[id].kind {
                EdgeKind::Directed => t == target,
                EdgeKind::Bidirected => s == target || t == target,
            }
        })
        .collect()
}

/// Graph surgery for `do(target)`: cuts the target from its causes and
/// re-standardizes everything downstream.
pub fn do_surgery(m: &WeightedModel, target: &str) -> Result<WeightedModel> {
    let g = m.graph();
    let t = g.index_of(target)?;
    let removed = surgery_edges(g, t);
    if removed.is_empty() {
        return Ok(m.clone());
    }
    let mut edges = Vec::new();
    let mut coefficients = Coefficients::new();
    for (id, e) in g.edges().iter().enumerate() {
        if !removed.contains(&id) {
            edges.push(e.clone());
            coefficients.insert(e.clone(), m.coef[id]);
        }
    }
    let graph = CausalGraph::new(g.nodes().to_vec(), edges)?;
    attach_weights(&graph, &coefficients)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeChange {
    pub node: NodeName,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterventionReport {
    pub target: NodeName,
    pub delta: f64,
    /// Associations with the target's causes that the intervention breaks.
    pub removed_edges: Vec<Edge>,
    /// Predicted change of every node, in SD units, in declaration order.
    pub changes: Vec<NodeChange>,
}

impl InterventionReport {
    pub fn change(&self, node: &str) -> Option<f64> {
        self.changes.iter().find(|c| c.node.as_str() == node).map(|c| c.change)
    }
}

/// Predicted cascade of setting `target` `delta` SD away from its current
/// value: each node moves by `delta` times the target's total effect on it in
/// the surgered model.
///
/// Total effects depend on path coefficients only, so the prediction does not
/// require the surgered model to be re-standardizable.
pub fn predict_intervention(m: &WeightedModel, target: &str, delta: f64) -> Result<InterventionReport> {
    let g = m.graph();
    let t = g.index_of(target)?;
    if !delta.is_finite() {
        return Err(Error::InvalidQuery("intervention size must be finite".into()));
    }
    let removed = surgery_edges(g, t);
    let mut coef = m.coef.clone();
    for &id in &removed {
        coef[id] = 0.0;
    }
    let effects = total_effect_matrix(g, &coefficient_matrix(g, &coef));
    Ok(InterventionReport {
        target: g.node(t).clone(),
        delta,
        removed_edges: removed.iter().map(|&id| g.edges()[id].clone()).collect(),
        changes: (0..g.len())
            .map(|v| NodeChange {
                node: g.node(v).clone(),
                change: delta * effects[(v, t)] + 0.0,
            })
            .collect(),
    })
}
