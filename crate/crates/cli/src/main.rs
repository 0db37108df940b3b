//! `backdoor`: command-line front end. Every subcommand builds a query, runs
//! it through the same code the server uses and prints the report.

mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backdoor_core::io::{
    parse_correlation_csv, parse_dag, read_dataset_csv, write_dag, write_dataset_csv, DagDocument,
};
use backdoor_core::paths::DEFAULT_PATH_CAP;
use backdoor_core::simulate::DEFAULT_ROWS;
use backdoor_server::query::{self, Artifact, Inputs, Method, Observed, Options, PathSet, Query};
use backdoor_server::Api;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "backdoor", version, about = "Causal queries on linear path models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Sources {
    /// Model or graph in `.dag` format.
    #[arg(long, value_name = "PATH")]
    graph: Option<PathBuf>,
    /// Observed correlation matrix (`.cor.csv`).
    #[arg(long, value_name = "PATH", conflicts_with = "data")]
    cor: Option<PathBuf>,
    /// Observed rows (`.data.csv`).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Format {
    /// Print the report document (default).
    #[arg(long, conflicts_with = "table")]
    json: bool,
    /// Print aligned text instead of JSON.
    #[arg(long)]
    table: bool,
}

#[derive(Debug, Args)]
struct Pair {
    #[arg(long, value_name = "NODE")]
    exposure: String,
    #[arg(long, value_name = "NODE")]
    outcome: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List paths between two nodes and whether an adjustment set blocks them.
    Paths {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[arg(long, visible_alias = "exposure", value_name = "NODE")]
        from: String,
        #[arg(long, visible_alias = "outcome", value_name = "NODE")]
        to: String,
        #[arg(long, value_enum, default_value = "all")]
        set: PathSetArg,
        #[arg(long, value_delimiter = ',', value_name = "N1,N2")]
        adjust: Vec<String>,
        #[arg(long, value_name = "K")]
        max_path_len: Option<usize>,
    },
    /// Backdoor paths, valid and minimal adjustment sets.
    Adjust {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[command(flatten)]
        pair: Pair,
    },
    /// Total, direct and indirect causal effect.
    Effect {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[command(flatten)]
        pair: Pair,
        /// Nodes held fixed; paths through them are cut.
        #[arg(long, value_delimiter = ',', value_name = "N1,N2")]
        fixed: Vec<String>,
    },
    /// Split a correlation into causal and non-causal parts.
    Decompose {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[command(flatten)]
        pair: Pair,
    },
    /// Standardized regression of the outcome on the exposure and the adjustment set.
    Regress {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[arg(long, value_name = "NODE")]
        outcome: String,
        #[arg(long, value_name = "NODE")]
        exposure: Option<String>,
        #[arg(long, value_delimiter = ',', value_name = "N1,N2")]
        adjust: Vec<String>,
    },
    /// Correlations implied by a weighted model.
    Implied {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[arg(long, value_enum, default_value = "matrix")]
        method: MethodArg,
    },
    /// Fit path coefficients to a correlation matrix or data.
    Fit {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        /// Also write the fitted model as a `.dag` file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Draw rows from a weighted model, optionally select on a threshold.
    Simulate {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[arg(long, value_name = "COUNT", default_value_t = DEFAULT_ROWS)]
        n: usize,
        #[arg(long, value_name = "U64", default_value_t = 0)]
        seed: u64,
        /// Keep only rows where `NODE>THRESH` (or `NODE<THRESH`) holds.
        #[arg(long, value_name = "NODE>THRESH")]
        select: Option<String>,
        /// Refit the graph to the simulated rows.
        #[arg(long)]
        fit: bool,
        /// Also write the rows as a `.data.csv` file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Fit every orientation of a skeleton and tabulate effects.
    Enumerate {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        /// `complete:A,B,C` or `A-B,B-C`; defaults to the graph's skeleton.
        #[arg(long, value_name = "SPEC")]
        skeleton: Option<String>,
        /// `EXPOSURE:OUTCOME[:FIXED...]`; repeatable.
        #[arg(long = "query", value_name = "A:C[:B...]")]
        queries: Vec<String>,
        #[arg(long, value_name = "COUNT")]
        max_orientations: Option<usize>,
    },
    /// Predicted change of every node when one is set away from its value.
    Intervene {
        #[command(flatten)]
        sources: Sources,
        #[command(flatten)]
        format: Format,
        #[arg(long, visible_alias = "exposure", value_name = "NODE")]
        target: String,
        /// Size of the shift in standard deviations.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        delta: f64,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:8787")]
        bind: String,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum PathSetArg {
    All,
    Directed,
    Backdoor,
    Treks,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Matrix,
    Tracing,
}

/// Exit 2: something the user can fix. Exit 1: our fault.
enum Failure {
    User(String),
    Internal(String),
}

impl From<backdoor_core::Error> for Failure {
    fn from(e: backdoor_core::Error) -> Self {
        Failure::User(format!("{} [{}]", e, e.code()))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))
}

fn located(path: &Path, e: backdoor_core::Error) -> Failure {
    Failure::User(format!("{}: {} [{}]", path.display(), e, e.code()))
}

fn load(sources: &Sources) -> Result<Inputs, Failure> {
    let graph = match &sources.graph {
        Some(p) => {
            let text = read(p)?;
            Some((parse_dag(&text).map_err(|e| located(p, e))?, text))
        }
        None => None,
    };
    let observed = match (&sources.cor, &sources.data) {
        (Some(p), _) => {
            let text = read(p)?;
            Some((Observed::Correlation(parse_correlation_csv(&text).map_err(|e| located(p, e))?), text))
        }
        (None, Some(p)) => {
            let text = read(p)?;
            Some((Observed::Data(read_dataset_csv(&text).map_err(|e| located(p, e))?), text))
        }
        (None, None) => None,
    };
    Ok(Inputs { graph, observed })
}

fn path_cap() -> Result<usize, Failure> {
    match std::env::var("BACKDOOR_PATH_CAP") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Failure::User(format!("BACKDOOR_PATH_CAP must be a positive integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_PATH_CAP),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::User(format!("cannot write {}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (sources, format, query, out) = match cli.command {
        Command::Serve { bind } => {
            let api = Api::new(Options { path_cap: path_cap()? });
            return backdoor_server::serve_blocking(&bind, api)
                .map_err(|e| Failure::User(format!("cannot serve on {bind}: {e}")));
        }
        Command::Paths {
            sources,
            format,
            from,
            to,
            set,
            adjust,
            max_path_len,
        } => {
            let set = match set {
                PathSetArg::All => PathSet::All,
                PathSetArg::Directed => PathSet::Directed,
                PathSetArg::Backdoor => PathSet::Backdoor,
                PathSetArg::Treks => PathSet::Treks,
            };
            let q = Query::Paths {
                from,
                to,
                set,
                adjust,
                max_len: max_path_len,
            };
            (sources, format, q, None)
        }
        Command::Adjust { sources, format, pair } => (
            sources,
            format,
            Query::Adjust {
                exposure: pair.exposure,
                outcome: pair.outcome,
            },
            None,
        ),
        Command::Effect {
            sources,
            format,
            pair,
            fixed,
        } => (
            sources,
            format,
            Query::Effect {
                exposure: pair.exposure,
                outcome: pair.outcome,
                fixed,
            },
            None,
        ),
        Command::Decompose { sources, format, pair } => (
            sources,
            format,
            Query::Decompose {
                exposure: pair.exposure,
                outcome: pair.outcome,
            },
            None,
        ),
        Command::Regress {
            sources,
            format,
            outcome,
            exposure,
            adjust,
        } => {
            let predictors = exposure.into_iter().chain(adjust).collect();
            (sources, format, Query::Regress { outcome, predictors }, None)
        }
        Command::Implied { sources, format, method } => {
            let method = match method {
                MethodArg::Matrix => Method::Matrix,
                MethodArg::Tracing => Method::Tracing,
            };
            (sources, format, Query::Implied { method }, None)
        }
        Command::Fit { sources, format, out } => (sources, format, Query::Fit, out),
        Command::Simulate {
            sources,
            format,
            n,
            seed,
            select,
            fit,
            out,
        } => (sources, format, Query::Simulate { n, seed, select, fit }, out),
        Command::Enumerate {
            sources,
            format,
            skeleton,
            queries,
            max_orientations,
        } => (
            sources,
            format,
            Query::Enumerate {
                skeleton,
                queries,
                cap: max_orientations,
            },
            None,
        ),
        Command::Intervene {
            sources,
            format,
            target,
            delta,
        } => (sources, format, Query::Intervene { target, delta }, None),
    };
    let inputs = load(&sources)?;
    let options = Options { path_cap: path_cap()? };
    let output = query::run(&query, &inputs, &options)?;
    if let Some(path) = &out {
        match &output.artifact {
            Some(Artifact::Model(m)) => {
                let comments = inputs.graph.as_ref().map(|(d, _)| d.comments.clone()).unwrap_or_default();
                let doc = DagDocument {
                    graph: m.graph().clone(),
                    coefficients: Some(m.coefficients()),
                    comments,
                };
                write_file(path, &write_dag(&doc))?;
            }
            Some(Artifact::Dataset(d)) => write_file(path, &write_dataset_csv(d))?,
            None => {}
        }
    }
    let text = if format.table {
        table::render(&output.report.to_value())
    } else {
        output.report.to_json()
    };
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| Failure::Internal(format!("cannot write output: {e}")))
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        eprintln!("backdoor: internal error: {info}");
    }));
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::User(msg))) => {
            eprintln!("backdoor: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("backdoor: {msg}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}
