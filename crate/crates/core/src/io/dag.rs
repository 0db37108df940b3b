//! The `.dag` text grammar:
//!
//! ```text
//! # comment
//! node NAME
//! SRC -> DST [coef=R]
//! A <-> B [coef=R]
//! ```
//!
//! Brackets around attributes are optional. Coefficients must be given on
//! every edge or on none.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{is_identifier, CausalGraph, Edge, EdgeKind, NodeName};
use crate::sem::Coefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct DagDocument {
    pub graph: CausalGraph,
    /// Present only when every edge carries a coefficient.
    pub coefficients: Option<Coefficients>,
    /// Whole-line comments, without the leading `#`, in file order.
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Word(&'a str),
    Arrow(EdgeKind),
    Attr { key: &'a str, value: &'a str },
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<(usize, Token<'_>)>> {
    let bytes = line.as_bytes();
    let col = |i: usize| line[..i].chars().count() + 1;
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() || c == b'[' || c == b']' || c == b',' {
            i += 1;
            continue;
        }
        if line[i..].starts_with("<->") {
            out.push((col(i), Token::Arrow(EdgeKind::Bidirected)));
            i += 3;
            continue;
        }
        if line[i..].starts_with("->") {
            out.push((col(i), Token::Arrow(EdgeKind::Directed)));
            i += 2;
            continue;
        }
        if c == b'<' {
            return Err(Error::parse(lineno, col(i), "syntax", "expected `->` or `<->`"));
        }
        let start = i;
        while i < bytes.len() {
            let b = bytes[i];
            if b.is_ascii_whitespace() || b == b'[' || b == b']' || b == b',' || b == b'<' || line[i..].starts_with("->")
            {
                break;
            }
            i += line[i..].chars().next().map_or(1, char::len_utf8);
        }
        let word = &line[start..i];
        match word.split_once('=') {
            Some((key, value)) => out.push((col(start), Token::Attr { key, value })),
            None => out.push((col(start), Token::Word(word))),
        }
    }
    Ok(out)
}

fn name_at(word: &str, line: usize, column: usize) -> Result<NodeName> {
    if is_identifier(word) {
        Ok(NodeName::new(word)?)
    } else {
        Err(Error::parse(line, column, "invalid_name", format!("`{word}` is not a valid node name")))
    }
}

struct ParsedEdge {
    edge: Edge,
    coef: Option<f64>,
    line: usize,
    column: usize,
}

/// Parses a `.dag` document. Nodes are declared in order of first
/// appearance, whether in a `node` line or an edge.
pub fn parse_dag(text: &str) -> Result<DagDocument> {
    let mut nodes: Vec<NodeName> = Vec::new();
    let mut explicit: BTreeSet<NodeName> = BTreeSet::new();
    let mut edges: Vec<ParsedEdge> = Vec::new();
    let mut seen: HashMap<Edge, usize> = HashMap::new();
    let mut comments = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = raw.trim_start();
        if let Some(comment) = trimmed.strip_prefix('#') {
            comments.push(comment.to_string());
            continue;
        }
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content, lineno)?;
        let declare = |nodes: &mut Vec<NodeName>, n: &NodeName| {
            if !nodes.contains(n) {
                nodes.push(n.clone());
            }
        };
        match tokens.as_slice() {
            [] => {}
            [(_, Token::Word("node")), (c, Token::Word(w))] => {
                let n = name_at(w, lineno, *c)?;
                if !explicit.insert(n.clone()) {
                    return Err(Error::parse(lineno, *c, "duplicate_node", format!("node `{n}` declared twice")));
                }
                declare(&mut nodes, &n);
            }
            [(_, Token::Word("node")), rest @ ..] => {
                let c = rest.first().map_or(content.len() + 1, |t| t.0);
                return Err(Error::parse(lineno, c, "syntax", "expected `node NAME`"));
            }
            [(c1, Token::Word(a)), (ca, Token::Arrow(kind)), (c2, Token::Word(b)), attrs @ ..] => {
                let a = name_at(a, lineno, *c1)?;
                let b = name_at(b, lineno, *c2)?;
                if a == b {
                    return Err(Error::parse(lineno, *ca, "self_loop", format!("self-loop on `{a}`")));
                }
                let mut coef = None;
                for (c, t) in attrs {
                    match t {
                        Token::Attr { key: "coef", value } => {
                            if coef.is_some() {
                                return Err(Error::parse(lineno, *c, "syntax", "`coef` given twice"));
                            }
                            let v: f64 = value.parse().map_err(|_| {
                                Error::parse(lineno, *c, "non_numeric", format!("`{value}` is not a number"))
                            })?;
                            if !v.is_finite() {
                                return Err(Error::parse(lineno, *c, "non_numeric", "coefficient must be finite"));
                            }
                            coef = Some(v);
                        }
                        Token::Attr { key, .. } => {
                            return Err(Error::parse(lineno, *c, "unknown_key", format!("unknown attribute `{key}`")));
                        }
                        _ => return Err(Error::parse(lineno, *c, "syntax", "expected `key=value` after the edge")),
                    }
                }
                declare(&mut nodes, &a);
                declare(&mut nodes, &b);
                let edge = match kind {
                    EdgeKind::Directed => Edge::directed(a, b),
                    EdgeKind::Bidirected => Edge::bidirected(a, b),
                };
                if let Some(prev) = seen.insert(edge.clone(), lineno) {
                    return Err(Error::parse(
                        lineno,
                        *c1,
                        "duplicate_edge",
                        format!("edge {edge} already declared on line {prev}"),
                    ));
                }
                edges.push(ParsedEdge {
                    edge,
                    coef,
                    line: lineno,
                    column: *c1,
                });
            }
            [(c, _), ..] => {
                return Err(Error::parse(lineno, *c, "syntax", "expected `node NAME` or `A -> B` / `A <-> B`"));
            }
        }
    }

    let weighted = edges.iter().filter(|e| e.coef.is_some()).count();
    if weighted > 0 && weighted < edges.len() {
        let first = edges.iter().find(|e| e.coef.is_none()).expect("some edge is unweighted");
        return Err(Error::parse(
            first.line,
            first.column,
            "partial_weights",
            format!("edge {} has no coefficient but {weighted} other edges do", first.edge),
        ));
    }

    let graph = CausalGraph::new(nodes, edges.iter().map(|e| e.edge.clone()).collect()).map_err(|err| match &err {
        Error::Cycle(cycle) => {
            // Report the last-declared edge of the cycle.
            let closing = cycle
                .windows(2)
                .filter_map(|w| {
                    edges.iter().find(|e| {
                        e.edge.kind == EdgeKind::Directed && e.edge.source.as_str() == w[0] && e.edge.target.as_str() == w[1]
                    })
                })
                .max_by_key(|e| e.line)
                .expect("cycle edges come from the document");
            Error::parse(closing.line, closing.column, "cycle", err.to_string())
        }
        _ => Error::parse(1, 1, err.code(), err.to_string()),
    })?;
    let coefficients = (weighted == edges.len()).then(|| edges.iter().map(|e| (e.edge.clone(), e.coef.expect("all weighted"))).collect());
    Ok(DagDocument {
        graph,
        coefficients,
        comments,
    })
}

/// Serializes a graph as `node` lines followed by edge lines, with
/// coefficients when given. Every comment is written back first.
pub fn write_dag(doc: &DagDocument) -> String {
    let mut out = String::new();
    for c in &doc.comments {
        let _ = writeln!(out, "#{c}");
    }
    for n in doc.graph.nodes() {
        let _ = writeln!(out, "node {n}");
    }
    for e in doc.graph.edges() {
        match doc.coefficients.as_ref().and_then(|c| c.get(e)) {
            Some(c) => {
                let _ = writeln!(out, "{e} coef={c}");
            }
            None => {
                let _ = writeln!(out, "{e}");
            }
        }
    }
    out
}

/// Graphviz rendering; bidirected edges are dashed with arrowheads at both ends.
pub fn write_dot(g: &CausalGraph, coefficients: Option<&Coefficients>) -> String {
    let mut out = String::from("digraph {\n");
    for n in g.nodes() {
        let _ = writeln!(out, "  {n};");
    }
    for e in g.edges() {
        let mut attrs = Vec::new();
        if e.kind == EdgeKind::Bidirected {
            attrs.push("dir=both".to_string());
            attrs.push("style=dashed".to_string());
        }
        if let Some(c) = coefficients.and_then(|c| c.get(e)) {
            attrs.push(format!("label=\"{c}\""));
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        let _ = writeln!(out, "  {} -> {}{attrs};", e.source, e.target);
    }
    out.push_str("}\n");
    out
}
