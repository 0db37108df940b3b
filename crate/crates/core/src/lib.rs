//! Causal inference on linear path models over standardized variables.
//!
//! The crate is organised bottom-up: [`graph`] holds the data model,
//! [`paths`] the graphical criteria, [`sem`] the linear algebra of weighted
//! models, and [`fit`], [`simulate`] and [`enumerate`] build on those.
//! [`io`] owns every byte-level format.

pub mod enumerate;
pub mod error;
pub mod fit;
pub mod graph;
pub mod io;
pub mod paths;
pub mod sem;
pub mod simulate;

pub use error::{Error, Result};
pub use graph::{CausalGraph, Edge, EdgeKind, NodeName, Relation, Traversal};
