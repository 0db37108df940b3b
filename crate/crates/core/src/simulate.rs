//! Gaussian data generation from a weighted model, plus threshold selection
//! for collider-stratification experiments.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::NodeName;
use crate::sem::{WeightedModel, PSD_TOLERANCE};

pub const DEFAULT_ROWS: usize = 1_000_000;
const CHUNK_ROWS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    names: Vec<NodeName>,
    columns: Vec<Vec<f64>>,
    seed: u64,
    provenance: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from named columns of equal length.
    pub fn from_columns(names: Vec<NodeName>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidQuery(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateNode(name.to_string()));
            }
        }
        let n = columns.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidQuery(format!("column `{name}` has {} rows, expected {n}", col.len())));
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidQuery(format!("column `{name}` has a non-finite value")));
            }
        }
        Ok(Dataset {
            names,
            columns,
            seed: 0,
            provenance: Vec::new(),
        })
    }

    pub fn with_provenance(mut self, line: impl Into<String>) -> Self {
        self.provenance.push(line.into());
        self
    }

    pub fn names(&self) -> &[NodeName] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n.as_str() == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRule {
    pub node: NodeName,
    pub predicate: Predicate,
    pub threshold: f64,
}

impl SelectionRule {
    pub fn new(node: NodeName, predicate: Predicate, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::InvalidQuery(format!("selection threshold {threshold} is not finite")));
        }
        Ok(SelectionRule {
            node,
            predicate,
            threshold,
        })
    }

    pub fn keeps(&self, x: f64) -> bool {
        match self.predicate {
            Predicate::Greater => x > self.threshold,
            Predicate::Less => x < self.threshold,
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.predicate {
            Predicate::Greater => '>',
            Predicate::Less => '<',
        };
        write!(f, "{}{}{}", self.node, op, self.threshold)
    }
}

/// Parses `NODE>THRESH` or `NODE<THRESH`.
impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (pos, predicate) = match (s.find('>'), s.find('<')) {
            (Some(i), None) => (i, Predicate::Greater),
            (None, Some(i)) => (i, Predicate::Less),
            _ => return Err(Error::InvalidQuery(format!("selection `{s}` must look like NODE>VALUE or NODE<VALUE"))),
        };
        let node = NodeName::new(s[..pos].trim())?;
        let threshold: f64 = s[pos + 1..]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidQuery(format!("selection threshold in `{s}` is not a number")))?;
        SelectionRule::new(node, predicate, threshold)
    }
}

/// Lower-triangular `L` with `L L' = a` for a positive semidefinite `a`.
/// Columns whose pivot vanishes are zeroed, so singular covariances (for
/// example a perfectly correlated pair) are still samplable.
fn psd_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let pivot = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if pivot < -PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue: pivot });
        }
        if pivot <= 1e-12 {
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / d;
        }
    }
    let residual = (&l * l.transpose() - a).abs().max();
    if residual > 1e-6 {
        return Err(Error::NotPsd {
            min_eigenvalue: -residual,
        });
    }
    Ok(l)
}

fn standard_normal(bits: u64, normal: &Normal) -> f64 {
    // 53 random bits mapped to the open interval (0, 1).
    let u = ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    normal.inverse_cdf(u)
}

/// Draws `n` rows. Node `j` reads stream `j` of a ChaCha generator keyed by
/// `seed`, positioned at the row offset, so every (seed, node, chunk) triple
/// has its own reproducible stream independent of the chunking.
pub fn simulate(m: &WeightedModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidQuery("n must be at least 1".into()));
    }
    let g = m.graph();
    let k = g.len();
    let l = psd_factor(&m.error_covariance())?;
    let parents: Vec<Vec<(usize, f64)>> = (0..k)
        .map(|v| {
            g.edges()
                .iter()
                .enumerate()
                .filter(|(id, e)| e.is_directed() && g.edge_ends(*id).1 == v)
                .map(|(id, _)| (g.edge_ends(id).0, m.coefficient_list()[id]))
                .collect()
        })
        .collect();
    let order = g.order_idx();
    let normal = Normal::standard();

    let chunks: Vec<Vec<Vec<f64>>> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_ROWS;
            let rows = CHUNK_ROWS.min(n - start);
            let z: Vec<Vec<f64>> = (0..k)
                .map(|j| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64);
                    rng.set_word_pos(2 * start as u128);
                    (0..rows).map(|_| standard_normal(rng.next_u64(), &normal)).collect()
                })
                .collect();
            let mut x = vec![vec![0.0; rows]; k];
            for &v in order {
                let mut col: Vec<f64> = (0..rows)
                    .map(|r| (0..=v).map(|j| l[(v, j)] * z[j][r]).sum())
                    .collect();
                for &(p, beta) in &parents[v] {
                    for (xi, xp) in col.iter_mut().zip(&x[p]) {
                        *xi += beta * xp;
                    }
                }
                x[v] = col;
            }
            x
        })
        .collect();

    let mut columns = vec![Vec::with_capacity(n); k];
    for chunk in chunks {
        for (col, part) in columns.iter_mut().zip(chunk) {
            col.extend(part);
        }
    }
    let description = g
        .edges()
        .iter()
        .zip(m.coefficient_list())
        .map(|(e, c)| format!("{e} [{c}]"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Dataset {
        names: g.nodes().to_vec(),
        columns,
        seed,
        provenance: vec![format!("simulated n={n} seed={seed} from {description}")],
    })
}

/// Keeps the rows whose value of `rule.node` satisfies the predicate.
pub fn select(d: &Dataset, rule: &SelectionRule) -> Result<Dataset> {
    let key = d.column(rule.node.as_str())?;
    let keep: Vec<usize> = (0..d.n()).filter(|&r| rule.keeps(key[r])).collect();
    let columns = d
        .columns
        .iter()
        .map(|col| keep.iter().map(|&r| col[r]).collect())
        .collect();
    let mut provenance = d.provenance.clone();
    provenance.push(format!("selected {rule}: kept {} of {} rows", keep.len(), d.n()));
    if keep.is_empty() {
        provenance.push("selection left no rows".into());
    }
    Ok(Dataset {
        names: d.names.clone(),
        columns,
        seed: d.seed,
        provenance,
    })
}
