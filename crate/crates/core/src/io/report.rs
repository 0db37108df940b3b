//! The canonical report document shared by the command line and the server.
//! Keys are sorted at every level, numbers use the shortest decimal that
//! round-trips, and identical inputs give byte-identical text.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const REPORT_FORMAT: &str = "backdoor-report";
pub const REPORT_VERSION: u64 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    kind: String,
    query: Value,
    inputs: Vec<(String, String)>,
    result: Value,
    session: Option<(String, u64)>,
}

fn to_value<T: Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("report payloads serialize to JSON")
}

fn canonical(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().map(|(k, v)| (k, canonical(v))).collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().collect::<Map<_, _>>())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

impl Report {
    pub fn new<Q: Serialize + ?Sized, R: Serialize + ?Sized>(kind: &str, query: &Q, result: &R) -> Self {
        Report {
            kind: kind.to_string(),
            query: to_value(query),
            inputs: Vec::new(),
            result: to_value(result),
            session: None,
        }
    }

    /// Records the SHA-256 of an input document under `name`.
    pub fn input(mut self, name: &str, text: &str) -> Self {
        self.inputs.push((name.to_string(), sha256_hex(text.as_bytes())));
        self.inputs.sort();
        self
    }

    pub fn session(mut self, id: &str, revision: u64) -> Self {
        self.session = Some((id.to_string(), revision));
        self
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn result(&self) -> &Value {
        &self.result
    }

    /// Digest over every named input digest, in name order.
    pub fn inputs_digest(&self) -> String {
        let joined: String = self.inputs.iter().map(|(n, d)| format!("{n}:{d}\n")).collect();
        sha256_hex(joined.as_bytes())
    }

    pub fn to_value(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("format".into(), Value::from(REPORT_FORMAT));
        doc.insert("version".into(), Value::from(REPORT_VERSION));
        doc.insert("kind".into(), Value::from(self.kind.clone()));
        doc.insert("query".into(), self.query.clone());
        doc.insert("result".into(), self.result.clone());
        let inputs: Map<String, Value> = self
            .inputs
            .iter()
            .map(|(n, d)| (n.clone(), Value::from(d.clone())))
            .collect();
        doc.insert("inputs".into(), Value::Object(inputs));
        doc.insert("inputs_digest".into(), Value::from(self.inputs_digest()));
        doc.insert(
            "provenance".into(),
            serde_json::json!({ "engine": "backdoor", "version": env!("CARGO_PKG_VERSION") }),
        );
        if let Some((id, revision)) = &self.session {
            doc.insert("session".into(), serde_json::json!({ "id": id, "revision": revision }));
        }
        canonical(Value::Object(doc))
    }

    /// Pretty-printed document with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("values always print");
        s.push('\n');
        s
    }
}
