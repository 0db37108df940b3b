//! Queries shared by the command line and the session server. Both build a
//! [`Query`] and turn it into a report document with [`run`], so the two
//! surfaces cannot drift apart.

use backdoor_core::enumerate::{self, EffectQuery, Skeleton, DEFAULT_ORIENTATION_CAP};
use backdoor_core::fit::{self, FitResult};
use backdoor_core::io::{DagDocument, Report};
use backdoor_core::paths::{self, PathLimits, PathStatus, DEFAULT_MAX_LEN, DEFAULT_PATH_CAP};
use backdoor_core::sem::{self, CorrelationMatrix, ImpliedMethod, WeightedModel};
use backdoor_core::simulate::{self, Dataset, SelectionRule, DEFAULT_ROWS};
use backdoor_core::{CausalGraph, EdgeKind, Error, NodeName, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSet {
    #[default]
    All,
    Directed,
    Backdoor,
    Treks,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Matrix,
    Tracing,
}

fn one() -> f64 {
    1.0
}

fn default_rows() -> usize {
    DEFAULT_ROWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Query {
    Paths {
        from: String,
        to: String,
        #[serde(default)]
        set: PathSet,
        #[serde(default)]
        adjust: Vec<String>,
        #[serde(default)]
        max_len: Option<usize>,
    },
    Adjust {
        exposure: String,
        outcome: String,
    },
    Effect {
        exposure: String,
        outcome: String,
        #[serde(default)]
        fixed: Vec<String>,
    },
    Decompose {
        exposure: String,
        outcome: String,
    },
    Regress {
        outcome: String,
        predictors: Vec<String>,
    },
    Implied {
        #[serde(default)]
        method: Method,
    },
    Fit,
    Intervene {
        target: String,
        #[serde(default = "one")]
        delta: f64,
    },
    Simulate {
        #[serde(default = "default_rows")]
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        select: Option<String>,
        #[serde(default)]
        fit: bool,
    },
    Enumerate {
        /// Defaults to the skeleton of the loaded graph.
        #[serde(default)]
        skeleton: Option<String>,
        /// `EXPOSURE:OUTCOME[:FIXED...]`.
        #[serde(default)]
        queries: Vec<String>,
        #[serde(default)]
        cap: Option<usize>,
    },
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Paths { .. } => "paths",
            Query::Adjust { .. } => "adjust",
            Query::Effect { .. } => "effect",
            Query::Decompose { .. } => "decompose",
            Query::Regress { .. } => "regress",
            Query::Implied { .. } => "implied",
            Query::Fit => "fit",
            Query::Intervene { .. } => "intervene",
            Query::Simulate { .. } => "simulate",
            Query::Enumerate { .. } => "enumerate",
        }
    }
}

/// Observed evidence a query may use: a correlation matrix or raw rows.
#[derive(Debug, Clone)]
pub enum Observed {
    Correlation(CorrelationMatrix),
    Data(Dataset),
}

/// Everything a query runs against, with the source text of each input so
/// the report can record its digest.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub graph: Option<(DagDocument, String)>,
    pub observed: Option<(Observed, String)>,
}

impl Inputs {
    pub fn graph(&self) -> Result<&CausalGraph> {
        self.graph
            .as_ref()
            .map(|(d, _)| &d.graph)
            .ok_or_else(|| Error::InvalidQuery("this query needs a graph".into()))
    }

    /// The declared model when every edge has a coefficient, otherwise the
    /// graph fitted to the observed evidence.
    pub fn model(&self) -> Result<WeightedModel> {
        let (doc, _) = self
            .graph
            .as_ref()
            .ok_or_else(|| Error::InvalidQuery("this query needs a graph".into()))?;
        match (&doc.coefficients, &self.observed) {
            (Some(c), _) => sem::attach_weights(&doc.graph, c),
            (None, Some(_)) => Ok(self.fit()?.model),
            (None, None) => Err(Error::Unweighted),
        }
    }

    pub fn fit(&self) -> Result<FitResult> {
        let g = self.graph()?;
        match &self.observed {
            Some((Observed::Correlation(r), _)) => fit::fit(g, r),
            Some((Observed::Data(d), _)) => fit::fit_from_data(g, d),
            None => Err(Error::InvalidQuery("fitting needs a correlation matrix or data".into())),
        }
    }

    pub fn observed_correlation(&self) -> Result<Option<CorrelationMatrix>> {
        match &self.observed {
            Some((Observed::Correlation(r), _)) => Ok(Some(r.clone())),
            Some((Observed::Data(d), _)) => fit::sample_correlation(d).map(Some),
            None => Ok(None),
        }
    }

    fn record(&self, mut report: Report) -> Report {
        if let Some((_, text)) = &self.graph {
            report = report.input("graph", text);
        }
        match &self.observed {
            Some((Observed::Correlation(_), text)) => report.input("correlation", text),
            Some((Observed::Data(_), text)) => report.input("data", text),
            None => report,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    pub path_cap: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { path_cap: DEFAULT_PATH_CAP }
    }
}

/// Byproducts a caller may want to write out next to the report.
#[derive(Debug, Clone)]
pub enum Artifact {
    Model(WeightedModel),
    Dataset(Dataset),
}

#[derive(Debug, Clone)]
pub struct Output {
    pub report: Report,
    pub artifact: Option<Artifact>,
}

#[derive(Serialize)]
struct PathsResult {
    count: usize,
    paths: Vec<PathStatus>,
}

#[derive(Serialize)]
struct RegressResult {
    /// `observed` when computed from evidence, `implied` when from the model.
    source: &'static str,
    #[serde(flatten)]
    regression: sem::RegressionResult,
}

#[derive(Serialize)]
struct ImpliedResult {
    method: Method,
    correlations: CorrelationMatrix,
    max_abs_residual: Option<f64>,
}

#[derive(Serialize)]
struct SimulateResult {
    n: usize,
    seed: u64,
    provenance: Vec<String>,
    correlations: Option<CorrelationMatrix>,
    fit: Option<FitResult>,
}

/// Parses `EXPOSURE:OUTCOME[:FIXED...]`.
pub fn parse_effect_query(s: &str) -> Result<EffectQuery> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() < 2 {
        return Err(Error::InvalidQuery(format!("expected EXPOSURE:OUTCOME[:FIXED...], got `{s}`")));
    }
    EffectQuery::new(parts[0], parts[1], &parts[2..])
}

fn skeleton_of(g: &CausalGraph) -> Result<Skeleton> {
    let mut pairs = Vec::new();
    for e in g.edges() {
        if e.kind == EdgeKind::Bidirected {
            return Err(Error::InvalidSkeleton(format!(
                "bidirected edge {e} has no orientation to enumerate"
            )));
        }
        pairs.push((e.source.clone(), e.target.clone()));
    }
    Skeleton::new(g.nodes().to_vec(), pairs)
}

fn names(list: &[String]) -> Result<Vec<NodeName>> {
    list.iter().map(|s| NodeName::new(s.as_str())).collect()
}

pub fn run(query: &Query, inputs: &Inputs, options: &Options) -> Result<Output> {
    let cap = options.path_cap;
    let mut artifact = None;
    let result = match query {
        Query::Paths {
            from,
            to,
            set,
            adjust,
            max_len,
        } => {
            let g = inputs.graph()?;
            let limits = PathLimits {
                max_len: max_len.unwrap_or(DEFAULT_MAX_LEN),
                cap,
            };
            let found = match set {
                PathSet::All => paths::all_paths(g, from, to, &limits)?,
                PathSet::Directed => paths::directed_paths(g, from, to, &limits)?,
                PathSet::Backdoor => paths::backdoor_paths(g, from, to, &limits)?,
                PathSet::Treks => paths::treks(g, from, to, &limits)?,
            };
            let adjust = names(adjust)?;
            let statuses = found
                .iter()
                .map(|p| paths::path_status(g, p, &adjust))
                .collect::<Result<Vec<_>>>()?;
            to_value(&PathsResult {
                count: statuses.len(),
                paths: statuses,
            })
        }
        Query::Adjust { exposure, outcome } => to_value(&paths::adjustment_sets(inputs.graph()?, exposure, outcome, cap)?),
        Query::Effect {
            exposure,
            outcome,
            fixed,
        } => to_value(&sem::total_effect(&inputs.model()?, exposure, outcome, fixed)?),
        Query::Decompose { exposure, outcome } => {
            to_value(&sem::correlation_decomposition(&inputs.model()?, exposure, outcome)?)
        }
        Query::Regress { outcome, predictors } => {
            let result = match inputs.observed_correlation()? {
                Some(r) => RegressResult {
                    source: "observed",
                    regression: sem::regress(&r, outcome, predictors)?,
                },
                None => RegressResult {
                    source: "implied",
                    regression: sem::expected_regression(&inputs.model()?, outcome, predictors)?,
                },
            };
            to_value(&result)
        }
        Query::Implied { method } => {
            let m = inputs.model()?;
            let how = match method {
                Method::Matrix => ImpliedMethod::Matrix,
                Method::Tracing => ImpliedMethod::Tracing,
            };
            let implied = sem::implied_correlations_capped(&m, how, cap)?;
            let residual = match inputs.observed_correlation()? {
                Some(r) => Some(implied.max_abs_diff(&r)?),
                None => None,
            };
            to_value(&ImpliedResult {
                method: *method,
                correlations: implied,
                max_abs_residual: residual,
            })
        }
        Query::Fit => {
            let fitted = inputs.fit()?;
            artifact = Some(Artifact::Model(fitted.model.clone()));
            to_value(&fitted)
        }
        Query::Intervene { target, delta } => to_value(&sem::predict_intervention(&inputs.model()?, target, *delta)?),
        Query::Simulate { n, seed, select, fit } => {
            let m = inputs.model()?;
            let mut data = simulate::simulate(&m, *n, *seed)?;
            if let Some(rule) = select {
                data = simulate::select(&data, &rule.parse::<SelectionRule>()?)?;
            }
            let fitted = if *fit {
                Some(fit::fit_from_data(m.graph(), &data)?)
            } else {
                None
            };
            let correlations = if data.n() >= 2 {
                Some(fit::sample_correlation(&data)?)
            } else {
                None
            };
            let result = to_value(&SimulateResult {
                n: data.n(),
                seed: data.seed(),
                provenance: data.provenance().to_vec(),
                correlations,
                fit: fitted,
            });
            artifact = Some(Artifact::Dataset(data));
            result
        }
        Query::Enumerate { skeleton, queries, cap } => {
            let skeleton = match skeleton {
                Some(s) => s.parse::<Skeleton>()?,
                None => skeleton_of(inputs.graph()?)?,
            };
            let r = inputs
                .observed_correlation()?
                .ok_or_else(|| Error::InvalidQuery("enumeration needs a correlation matrix or data".into()))?;
            let queries = queries
                .iter()
                .map(|q| parse_effect_query(q))
                .collect::<Result<Vec<_>>>()?;
            to_value(&enumerate::enumerate_and_fit(
                &skeleton,
                &r,
                &queries,
                cap.unwrap_or(DEFAULT_ORIENTATION_CAP),
            )?)
        }
    };
    let report = Report::new(query.kind(), query, &result);
    Ok(Output {
        report: inputs.record(report),
        artifact,
    })
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}
