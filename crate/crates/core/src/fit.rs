//! Per-equation least-squares fitting of a graph to a correlation matrix or a
//! raw dataset. Each endogenous node is regressed on its parents; there is no
//! global optimisation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, EdgeKind, NodeName};
use crate::sem::{
    attach_weights, implied_correlations, regress, solve_normal_equations, Coefficients, CorrelationMatrix,
    ImpliedMethod, RegressionResult, WeightedModel,
};
use crate::simulate::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: WeightedModel,
    /// One regression per endogenous node, in declaration order.
    pub per_equation: Vec<RegressionResult>,
    /// Largest `|observed - implied|` correlation over the graph's nodes.
    pub max_abs_residual: f64,
}

/// Restricts `r` to the graph's nodes, in declaration order.
fn restrict(g: &CausalGraph, r: &CorrelationMatrix) -> Result<CorrelationMatrix> {
    let idx = g
        .nodes()
        .iter()
        .map(|n| r.index_of(n.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let values = DMatrix::from_fn(idx.len(), idx.len(), |i, j| r.at(idx[i], idx[j]));
    CorrelationMatrix::from_matrix(g.nodes().to_vec(), values)
}

fn regress_equations(g: &CausalGraph, r: &CorrelationMatrix) -> Result<Vec<(usize, RegressionResult)>> {
    (0..g.len())
        .into_par_iter()
        .filter(|&v| !g.is_exogenous(v))
        .map(|v| {
            let parents: Vec<&str> = g.parents_idx(v).iter().map(|&p| g.node(p).as_str()).collect();
            regress(r, g.node(v).as_str(), &parents).map(|res| (v, res))
        })
        .collect()
}

fn directed_coefficients(g: &CausalGraph, equations: &[(usize, RegressionResult)]) -> Coefficients {
    let mut coefficients = Coefficients::new();
    for e in g.edges().iter().filter(|e| e.kind == EdgeKind::Directed) {
        let (_, res) = equations
            .iter()
            .find(|(_, res)| res.outcome == e.target)
            .expect("every child has an equation");
        let beta = res.beta(e.source.as_str()).expect("parents are predictors");
        coefficients.insert(e.clone(), beta);
    }
    coefficients
}

fn finish(g: &CausalGraph, r: &CorrelationMatrix, coefficients: Coefficients, equations: Vec<(usize, RegressionResult)>) -> Result<FitResult> {
    let model = attach_weights(g, &coefficients)?;
    let implied = implied_correlations(&model, ImpliedMethod::Matrix)?;
    let max_abs_residual = implied.max_abs_diff(r)?;
    Ok(FitResult {
        model,
        per_equation: equations.into_iter().map(|(_, res)| res).collect(),
        max_abs_residual,
    })
}

/// Fits path coefficients from an observed correlation matrix. Bidirected
/// edges are supported between exogenous nodes only, where the error
/// covariance is the observed correlation.
pub fn fit(g: &CausalGraph, r: &CorrelationMatrix) -> Result<FitResult> {
    let r = restrict(g, r)?;
    let equations = regress_equations(g, &r)?;
    let mut coefficients = directed_coefficients(g, &equations);
    for (id, e) in g.edges().iter().enumerate() {
        if e.kind != EdgeKind::Bidirected {
            continue;
        }
        let (s, t) = g.edge_ends(id);
        if !(g.is_exogenous(s) && g.is_exogenous(t)) {
            return Err(Error::UnsupportedBidirected {
                edge: e.to_string(),
                reason: "a correlation matrix only determines bidirected edges between exogenous nodes; fit from data instead"
                    .into(),
            });
        }
        coefficients.insert(e.clone(), r.at(s, t));
    }
    finish(g, &r, coefficients, equations)
}

/// Fits path coefficients from raw data: standardizes each column, forms the
/// sample correlation matrix and regresses each node on its parents.
/// Bidirected error covariances are the covariances of the two equations'
/// standardized residuals, which requires that neither endpoint is an
/// ancestor of the other.
pub fn fit_from_data(g: &CausalGraph, data: &Dataset) -> Result<FitResult> {
    let columns = g
        .nodes()
        .iter()
        .map(|n| data.column(n.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let max_predictors = (0..g.len()).map(|v| g.parents_idx(v).len()).max().unwrap_or(0);
    if data.n() < max_predictors + 2 {
        return Err(Error::TooFewRows {
            n: data.n(),
            required: max_predictors + 2,
        });
    }
    let r = sample_correlations(g.nodes(), &columns)?;
    let equations = regress_equations(g, &r)?;
    let mut coefficients = directed_coefficients(g, &equations);
    for (id, e) in g.edges().iter().enumerate() {
        if e.kind != EdgeKind::Bidirected {
            continue;
        }
        let (s, t) = g.edge_ends(id);
        if g.ancestors_or_self(s)[t] || g.ancestors_or_self(t)[s] {
            return Err(Error::UnsupportedBidirected {
                edge: e.to_string(),
                reason: "one endpoint is an ancestor of the other, so per-equation least squares is biased".into(),
            });
        }
        coefficients.insert(e.clone(), residual_covariance(g, &r, s, t)?);
    }
    finish(g, &r, coefficients, equations)
}

/// Covariance of the least-squares residuals of `u` and `v` on their parents,
/// written in terms of the correlation matrix:
/// `r_uv - b_u' r_{Pu,v} - b_v' r_{Pv,u} + b_u' R_{Pu,Pv} b_v`.
fn residual_covariance(g: &CausalGraph, r: &CorrelationMatrix, u: usize, v: usize) -> Result<f64> {
    let pu = g.parents_idx(u);
    let pv = g.parents_idx(v);
    let bu = solve_normal_equations(r.matrix(), u, pu)?;
    let bv = solve_normal_equations(r.matrix(), v, pv)?;
    let mut cov = r.at(u, v);
    for (b, &p) in bu.iter().zip(pu) {
        cov -= b * r.at(p, v);
    }
    for (b, &p) in bv.iter().zip(pv) {
        cov -= b * r.at(p, u);
    }
    for (b1, &p1) in bu.iter().zip(pu) {
        for (b2, &p2) in bv.iter().zip(pv) {
            cov += b1 * b2 * r.at(p1, p2);
        }
    }
    Ok(cov)
}

/// Pearson correlations between every pair of columns in `data`.
pub fn sample_correlation(data: &Dataset) -> Result<CorrelationMatrix> {
    if data.n() < 2 {
        return Err(Error::TooFewRows { n: data.n(), required: 2 });
    }
    let columns: Vec<&[f64]> = data.columns().iter().map(|c| c.as_slice()).collect();
    sample_correlations(data.names(), &columns)
}

fn sample_correlations(names: &[NodeName], columns: &[&[f64]]) -> Result<CorrelationMatrix> {
    let n = columns.first().map_or(0, |c| c.len()) as f64;
    let standardized = columns
        .par_iter()
        .zip(names)
        .map(|(col, name)| {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd.is_nan() || sd <= f64::EPSILON * mean.abs().max(1.0) {
                return Err(Error::DegenerateColumn(name.to_string()));
            }
            Ok(col.iter().map(|x| (x - mean) / sd).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let k = standardized.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let products: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let dot: f64 = standardized[i].iter().zip(&standardized[j]).map(|(a, b)| a * b).sum();
            (dot / n).clamp(-1.0, 1.0)
        })
        .collect();
    let mut values = DMatrix::identity(k, k);
    for (&(i, j), &c) in pairs.iter().zip(&products) {
        values[(i, j)] = c;
        values[(j, i)] = c;
    }
    CorrelationMatrix::from_matrix(names.to_vec(), values)
}
