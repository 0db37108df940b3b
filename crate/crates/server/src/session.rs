//! In-memory sessions. Each commit swaps in a complete new snapshot, so a
//! reader holding the previous one keeps a consistent view.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use backdoor_core::io::{write_dag, DagDocument};
use backdoor_core::sem::{self, Coefficients, CorrelationMatrix};
use backdoor_core::{CausalGraph, Edge, EdgeKind, Error, NodeName};
use serde::{Deserialize, Serialize};

use crate::query::{Inputs, Observed};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub revision: u64,
    pub graph: CausalGraph,
    /// May cover only some edges while a model is being built up.
    pub coefficients: Coefficients,
    pub comments: Vec<String>,
    /// Parsed matrix and the text it came from.
    pub correlation: Option<(CorrelationMatrix, String)>,
}

impl Snapshot {
    pub fn is_weighted(&self) -> bool {
        self.graph.edges().iter().all(|e| self.coefficients.contains_key(e))
    }

    pub fn document(&self) -> DagDocument {
        DagDocument {
            graph: self.graph.clone(),
            coefficients: self.is_weighted().then(|| self.coefficients.clone()),
            comments: self.comments.clone(),
        }
    }

    pub fn dag_text(&self) -> String {
        write_dag(&self.document())
    }

    pub fn inputs(&self) -> Inputs {
        Inputs {
            graph: Some((self.document(), self.dag_text())),
            observed: self
                .correlation
                .as_ref()
                .map(|(r, text)| (Observed::Correlation(r.clone()), text.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub bidirected: bool,
}

impl EdgeSpec {
    pub fn to_edge(&self) -> Result<Edge, Error> {
        let s = NodeName::new(self.source.as_str())?;
        let t = NodeName::new(self.target.as_str())?;
        Ok(if self.bidirected {
            Edge::bidirected(s, t)
        } else {
            Edge::directed(s, t)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    AddNode {
        name: String,
    },
    /// Also drops every edge touching the node.
    RemoveNode {
        name: String,
    },
    AddEdge {
        edge: EdgeSpec,
        #[serde(default)]
        coef: Option<f64>,
    },
    RemoveEdge {
        edge: EdgeSpec,
    },
    /// Turns `source -> target` into `target -> source`, keeping its coefficient.
    ReverseEdge {
        edge: EdgeSpec,
    },
    SetCoefficient {
        edge: EdgeSpec,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EditError {
    Stale { expected: u64, current: u64 },
    Invalid(Error),
}

impl From<Error> for EditError {
    fn from(e: Error) -> Self {
        EditError::Invalid(e)
    }
}

fn missing_edge(e: &Edge) -> Error {
    Error::InvalidQuery(format!("edge {e} is not in the graph"))
}

fn apply(graph: &mut CausalGraph, coefficients: &mut Coefficients, edit: &Edit) -> Result<(), Error> {
    match edit {
        Edit::AddNode { name } => {
            *graph = graph.with_node(NodeName::new(name.as_str())?)?;
        }
        Edit::RemoveNode { name } => {
            *graph = graph.without_node(name)?;
            coefficients.retain(|e, _| e.source.as_str() != name && e.target.as_str() != name);
        }
        Edit::AddEdge { edge, coef } => {
            let e = edge.to_edge()?;
            *graph = graph.with_edge(e.clone())?;
            if let Some(c) = coef {
                coefficients.insert(e, *c);
            }
        }
        Edit::RemoveEdge { edge } => {
            let e = edge.to_edge()?;
            *graph = graph.without_edge(&e)?;
            coefficients.remove(&e);
        }
        Edit::ReverseEdge { edge } => {
            let e = edge.to_edge()?;
            if e.kind != EdgeKind::Directed {
                return Err(Error::InvalidQuery(format!("{e} has no direction to reverse")));
            }
            let reversed = Edge::directed(e.target.clone(), e.source.clone());
            *graph = graph.without_edge(&e)?.with_edge(reversed.clone())?;
            if let Some(c) = coefficients.remove(&e) {
                coefficients.insert(reversed, c);
            }
        }
        Edit::SetCoefficient { edge, value } => {
            let e = edge.to_edge()?;
            if graph.edge_index(&e).is_none() {
                return Err(missing_edge(&e));
            }
            coefficients.insert(e, *value);
        }
    }
    Ok(())
}

fn validate(snapshot: &Snapshot) -> Result<(), Error> {
    if let Some((e, _)) = snapshot.coefficients.iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::NonFiniteCoefficient(e.to_string()));
    }
    if snapshot.is_weighted() {
        sem::attach_weights(&snapshot.graph, &snapshot.coefficients)?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct Session {
    id: String,
    current: Mutex<Arc<Snapshot>>,
    save_path: Mutex<Option<PathBuf>>,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.lock().expect("session lock").clone()
    }

    pub fn save_path(&self) -> Option<PathBuf> {
        self.save_path.lock().expect("session lock").clone()
    }

    pub fn set_save_path(&self, path: PathBuf) {
        *self.save_path.lock().expect("session lock") = Some(path);
    }

    /// Applies `edits` atomically. On any failure the session is unchanged.
    pub fn edit(&self, expected_revision: Option<u64>, edits: &[Edit]) -> Result<Arc<Snapshot>, EditError> {
        self.commit(expected_revision, |next| {
            for edit in edits {
                apply(&mut next.graph, &mut next.coefficients, edit)?;
            }
            Ok(())
        })
    }

    pub fn set_correlation(
        &self,
        expected_revision: Option<u64>,
        correlation: Option<(CorrelationMatrix, String)>,
    ) -> Result<Arc<Snapshot>, EditError> {
        self.commit(expected_revision, |next| {
            next.correlation = correlation;
            Ok(())
        })
    }

    fn commit(
        &self,
        expected_revision: Option<u64>,
        change: impl FnOnce(&mut Snapshot) -> Result<(), Error>,
    ) -> Result<Arc<Snapshot>, EditError> {
        let mut current = self.current.lock().expect("session lock");
        if let Some(expected) = expected_revision {
            if expected != current.revision {
                return Err(EditError::Stale {
                    expected,
                    current: current.revision,
                });
            }
        }
        let mut next = Snapshot::clone(&current);
        change(&mut next)?;
        validate(&next)?;
        next.revision = current.revision + 1;
        let next = Arc::new(next);
        *current = next.clone();
        Ok(next)
    }
}

#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a session at revision 0. Partial coefficients are not accepted
    /// here; the document either names all of them or none.
    pub fn create(
        &self,
        document: DagDocument,
        correlation: Option<(CorrelationMatrix, String)>,
        save_path: Option<PathBuf>,
    ) -> Result<Arc<Session>, Error> {
        let snapshot = Snapshot {
            revision: 0,
            graph: document.graph,
            coefficients: document.coefficients.unwrap_or_default(),
            comments: document.comments,
            correlation,
        };
        validate(&snapshot)?;
        let session = Arc::new(Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            current: Mutex::new(Arc::new(snapshot)),
            save_path: Mutex::new(save_path),
        });
        self.sessions
            .write()
            .expect("store lock")
            .insert(session.id.clone(), session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.write().expect("store lock").remove(id)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
