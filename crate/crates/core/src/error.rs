use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant maps to a stable
/// machine-readable code (see [`Error::code`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid node name `{0}`")]
    InvalidName(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge {0}")]
    DuplicateEdge(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("path enumeration exceeded the cap of {cap} paths")]
    PathExplosion { cap: usize },
    #[error("{candidates} candidate adjustment variables exceed the exhaustive-search limit of {limit}")]
    GraphTooLarge { candidates: usize, limit: usize },
    #[error("no valid adjustment set exists for {exposure} -> {outcome}")]
    NoValidSet { exposure: String, outcome: String },
    #[error("missing coefficient for edge {0}")]
    MissingCoefficient(String),
    #[error("the graph has no coefficients; supply a correlation matrix or data to fit it")]
    Unweighted,
    #[error("coefficient for edge {0} is not part of the graph")]
    StrayCoefficient(String),
    #[error("non-finite coefficient on edge {0}")]
    NonFiniteCoefficient(String),
    #[error("coefficients into `{node}` leave a negative error variance ({error_var:.6})")]
    InfeasibleStandardization { node: String, error_var: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: String, col: String },
    #[error("diagonal entry for `{0}` is not 1")]
    NotUnitDiagonal(String),
    #[error("correlation ({row}, {col}) = {value} lies outside [-1, 1]")]
    OutOfRange { row: String, col: String, value: f64 },
    #[error("predictors are singular or nearly collinear (condition number {condition:.3e})")]
    SingularPredictors { condition: f64 },
    #[error("invalid regression: {0}")]
    InvalidRegression(String),
    #[error("unsupported bidirected edge {edge}: {reason}")]
    UnsupportedBidirected { edge: String, reason: String },
    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),
    #[error("dataset has {n} rows; at least {required} are needed")]
    TooFewRows { n: usize, required: usize },
    #[error("too many orientations (cap {cap})")]
    TooManyOrientations { cap: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        code: &'static str,
        message: String,
    },
}

impl Error {
    /// Stable reason code for wire responses and diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidName(_) => "invalid_name",
            Error::UnknownNode(_) => "unknown_node",
            Error::DuplicateNode(_) => "duplicate_node",
            Error::DuplicateEdge(_) => "duplicate_edge",
            Error::SelfLoop(_) => "self_loop",
            Error::Cycle(_) => "cycle",
            Error::PathExplosion { .. } => "path_explosion",
            Error::GraphTooLarge { .. } => "graph_too_large",
            Error::NoValidSet { .. } => "no_valid_set",
            Error::MissingCoefficient(_) => "missing_coefficient",
            Error::Unweighted => "unweighted",
            Error::StrayCoefficient(_) => "stray_coefficient",
            Error::NonFiniteCoefficient(_) => "non_finite_coefficient",
            Error::InfeasibleStandardization { .. } => "infeasible_standardization",
            Error::NotPsd { .. } => "not_psd",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NotUnitDiagonal(_) => "not_unit_diagonal",
            Error::OutOfRange { .. } => "out_of_range",
            Error::SingularPredictors { .. } => "singular_predictors",
            Error::InvalidRegression(_) => "invalid_regression",
            Error::UnsupportedBidirected { .. } => "unsupported_bidirected",
            Error::DegenerateColumn(_) => "degenerate_column",
            Error::TooFewRows { .. } => "too_few_rows",
            Error::TooManyOrientations { .. } => "too_many_orientations",
            Error::InvalidSkeleton(_) => "invalid_skeleton",
            Error::InvalidQuery(_) => "invalid_query",
            Error::Parse { code, .. } => code,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, code: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            code,
            message: message.into(),
        }
    }
}
