//! Request routing, independent of any transport. [`Api::handle`] takes a
//! method, a path and a JSON body and returns a status and a report document.

use std::path::PathBuf;
use std::sync::Arc;

use backdoor_core::io::{parse_correlation_csv, parse_dag, Report};
use backdoor_core::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::query::{self, Options, Query};
use crate::session::{Edit, EditError, Session, SessionStore, Snapshot};

/// Route names accepted under `POST /sessions/{id}/{kind}`.
pub const QUERY_KINDS: [&str; 10] = [
    "paths",
    "adjust",
    "effect",
    "decompose",
    "regress",
    "implied",
    "fit",
    "intervene",
    "simulate",
    "enumerate",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: String,
    message: String,
    line: Option<usize>,
    column: Option<usize>,
}

/// A failed request: status, reason code and message, plus the session
/// revision it was checked against when there is one.
#[derive(Debug)]
struct Failure {
    status: u16,
    code: String,
    message: String,
    location: Option<(usize, usize)>,
    session: Option<(String, u64)>,
}

impl Failure {
    fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Failure {
            status,
            code: code.to_string(),
            message: message.into(),
            location: None,
            session: None,
        }
    }

    fn at(mut self, session: &Session) -> Self {
        self.session = Some((session.id().to_string(), session.snapshot().revision));
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let location = match &e {
            Error::Parse { line, column, .. } => Some((*line, *column)),
            _ => None,
        };
        let status = match e {
            Error::Parse { .. } => 400,
            _ => 422,
        };
        Failure {
            status,
            code: e.code().to_string(),
            message: e.to_string(),
            location,
            session: None,
        }
    }
}

impl From<EditError> for Failure {
    fn from(e: EditError) -> Self {
        match e {
            EditError::Stale { expected, current } => Failure::new(
                409,
                "stale_revision",
                format!("edit expected revision {expected} but the session is at {current}"),
            ),
            EditError::Invalid(e) => e.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    /// `.dag` text; alternatively `path` names a file to load.
    #[serde(default)]
    graph: Option<String>,
    #[serde(default)]
    path: Option<PathBuf>,
    #[serde(default)]
    correlation: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    #[serde(default)]
    expected_revision: Option<u64>,
    edits: Vec<Edit>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationRequest {
    #[serde(default)]
    expected_revision: Option<u64>,
    /// CSV text; `null` clears the matrix.
    csv: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaveRequest {
    #[serde(default)]
    path: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SessionView<'a> {
    graph: &'a backdoor_core::CausalGraph,
    weighted: bool,
    coefficients: Vec<WeightedEdge<'a>>,
    dag: String,
    correlation: Option<&'a backdoor_core::sem::CorrelationMatrix>,
    save_path: Option<String>,
}

#[derive(Debug, Serialize)]
struct WeightedEdge<'a> {
    edge: &'a backdoor_core::Edge,
    coef: f64,
}

#[derive(Debug, Serialize)]
struct Saved {
    path: String,
    bytes: usize,
}

#[derive(Debug, Default)]
pub struct Api {
    store: SessionStore,
    options: Options,
}

fn body_json<T: DeserializeOwned>(body: &str) -> Result<T, Failure> {
    let text = if body.trim().is_empty() { "{}" } else { body };
    serde_json::from_str(text).map_err(|e| Failure::new(400, "bad_request", format!("malformed request body: {e}")))
}

fn request_echo(method: &str, path: &str) -> Value {
    json!({ "method": method, "path": path })
}

impl Api {
    pub fn new(options: Options) -> Self {
        Api {
            store: SessionStore::new(),
            options,
        }
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn handle(&self, method: &str, path: &str, body: &str) -> Response {
        let route = path.split('?').next().unwrap_or("");
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| self.route(method, route, body)));
        match result {
            Ok(Ok((status, report))) => Response {
                status,
                body: report.to_json(),
            },
            Ok(Err(f)) => failure_response(method, route, f),
            Err(_) => failure_response(
                method,
                route,
                Failure::new(500, "internal", "the engine failed while handling this request"),
            ),
        }
    }

    fn route(&self, method: &str, path: &str, body: &str) -> Result<(u16, Report), Failure> {
        let parts: Vec<&str> = path.trim_matches('/').split('/').filter(|s| !s.is_empty()).collect();
        match (method, parts.as_slice()) {
            ("GET", ["health"]) => Ok((200, Report::new("health", &request_echo(method, path), &json!({"status": "ok"})))),
            ("POST", ["sessions"]) => self.create(body),
            ("GET", ["sessions", id]) => {
                let s = self.session(id)?;
                Ok((200, session_report(&s, &s.snapshot(), request_echo(method, path))))
            }
            ("DELETE", ["sessions", id]) => {
                let s = self.store.remove(id).ok_or_else(|| unknown_session(id))?;
                let snap = s.snapshot();
                Ok((
                    200,
                    Report::new("closed", &request_echo(method, path), &json!({"closed": true})).session(s.id(), snap.revision),
                ))
            }
            ("POST", ["sessions", id, "edits"]) => {
                let s = self.session(id)?;
                let req: EditRequest = body_json(body).map_err(|f| f.at(&s))?;
                let snap = s.edit(req.expected_revision, &req.edits).map_err(|e| Failure::from(e).at(&s))?;
                Ok((200, session_report(&s, &snap, json!({ "edits": req.edits }))))
            }
            ("PUT", ["sessions", id, "correlation"]) => {
                let s = self.session(id)?;
                let req: CorrelationRequest = body_json(body).map_err(|f| f.at(&s))?;
                let parsed = match req.csv {
                    Some(text) => Some((parse_correlation_csv(&text).map_err(|e| Failure::from(e).at(&s))?, text)),
                    None => None,
                };
                let snap = s
                    .set_correlation(req.expected_revision, parsed)
                    .map_err(|e| Failure::from(e).at(&s))?;
                Ok((200, session_report(&s, &snap, request_echo(method, path))))
            }
            ("POST", ["sessions", id, "save"]) => self.save(id, body),
            ("POST", ["sessions", id, "query"]) => {
                let s = self.session(id)?;
                let q: Query = body_json(body).map_err(|f| f.at(&s))?;
                self.query(&s, &q)
            }
            ("POST", ["sessions", id, kind]) if QUERY_KINDS.contains(kind) => {
                let s = self.session(id)?;
                let mut fields: Value = body_json(body).map_err(|f| f.at(&s))?;
                let obj = fields
                    .as_object_mut()
                    .ok_or_else(|| Failure::new(400, "bad_request", "request body must be a JSON object").at(&s))?;
                obj.insert("kind".into(), Value::from(*kind));
                let q: Query = serde_json::from_value(fields)
                    .map_err(|e| Failure::new(400, "bad_request", format!("malformed query: {e}")).at(&s))?;
                self.query(&s, &q)
            }
            (_, ["health"])
            | (_, ["sessions"])
            | (_, ["sessions", _])
            | (_, ["sessions", _, "edits" | "correlation" | "save" | "query"]) => {
                Err(Failure::new(405, "method_not_allowed", format!("{method} is not supported on {path}")))
            }
            (_, ["sessions", _, kind]) if QUERY_KINDS.contains(kind) => {
                Err(Failure::new(405, "method_not_allowed", format!("{method} is not supported on {path}")))
            }
            _ => Err(Failure::new(404, "not_found", format!("no route for {path}"))),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, Failure> {
        self.store.get(id).ok_or_else(|| unknown_session(id))
    }

    fn create(&self, body: &str) -> Result<(u16, Report), Failure> {
        let req: CreateRequest = body_json(body)?;
        let text = match (&req.graph, &req.path) {
            (Some(text), None) => text.clone(),
            (None, Some(path)) => std::fs::read_to_string(path)
                .map_err(|e| Failure::new(422, "unreadable_file", format!("cannot read {}: {e}", path.display())))?,
            _ => return Err(Failure::new(400, "bad_request", "give exactly one of `graph` and `path`")),
        };
        let document = parse_dag(&text)?;
        let correlation = match req.correlation {
            Some(csv) => Some((parse_correlation_csv(&csv)?, csv)),
            None => None,
        };
        let s = self.store.create(document, correlation, req.path.clone())?;
        let echo = json!({ "path": req.path.as_ref().map(|p| p.display().to_string()) });
        Ok((201, session_report(&s, &s.snapshot(), echo)))
    }

    fn save(&self, id: &str, body: &str) -> Result<(u16, Report), Failure> {
        let s = self.session(id)?;
        let req: SaveRequest = body_json(body).map_err(|f| f.at(&s))?;
        let path = req
            .path
            .or_else(|| s.save_path())
            .ok_or_else(|| Failure::new(422, "no_save_path", "the session has no file; give `path`").at(&s))?;
        let snap = s.snapshot();
        if !snap.is_weighted() && !snap.coefficients.is_empty() {
            return Err(Failure::new(
                422,
                "partial_weights",
                "some edges have coefficients and some do not; finish or clear them before saving",
            )
            .at(&s));
        }
        let text = snap.dag_text();
        std::fs::write(&path, &text)
            .map_err(|e| Failure::new(500, "io", format!("cannot write {}: {e}", path.display())).at(&s))?;
        s.set_save_path(path.clone());
        let saved = Saved {
            path: path.display().to_string(),
            bytes: text.len(),
        };
        let report = Report::new("save", &json!({ "path": saved.path }), &saved)
            .input("graph", &text)
            .session(s.id(), snap.revision);
        Ok((200, report))
    }

    fn query(&self, s: &Session, q: &Query) -> Result<(u16, Report), Failure> {
        let snap = s.snapshot();
        let out = query::run(q, &snap.inputs(), &self.options).map_err(|e| {
            let mut f = Failure::from(e);
            f.session = Some((s.id().to_string(), snap.revision));
            f
        })?;
        Ok((200, out.report.session(s.id(), snap.revision)))
    }
}

fn unknown_session(id: &str) -> Failure {
    Failure::new(404, "unknown_session", format!("no session `{id}`"))
}

fn session_report(s: &Session, snap: &Snapshot, echo: Value) -> Report {
    let dag = snap.dag_text();
    let view = SessionView {
        graph: &snap.graph,
        weighted: snap.is_weighted(),
        coefficients: snap
            .graph
            .edges()
            .iter()
            .filter_map(|e| snap.coefficients.get(e).map(|&coef| WeightedEdge { edge: e, coef }))
            .collect(),
        dag: dag.clone(),
        correlation: snap.correlation.as_ref().map(|(r, _)| r),
        save_path: s.save_path().map(|p| p.display().to_string()),
    };
    let mut report = Report::new("session", &echo, &view).input("graph", &dag);
    if let Some((_, text)) = &snap.correlation {
        report = report.input("correlation", text);
    }
    report.session(s.id(), snap.revision)
}

/// An error response built outside [`Api::handle`], for transport failures.
pub fn reject(method: &str, path: &str, status: u16, code: &str, message: &str) -> Response {
    failure_response(method, path, Failure::new(status, code, message))
}

fn failure_response(method: &str, path: &str, f: Failure) -> Response {
    let body = ErrorBody {
        code: f.code,
        message: f.message,
        line: f.location.map(|l| l.0),
        column: f.location.map(|l| l.1),
    };
    let mut report = Report::new("error", &request_echo(method, path), &body);
    if let Some((id, revision)) = &f.session {
        report = report.session(id, *revision);
    }
    Response {
        status: f.status,
        body: report.to_json(),
    }
}
