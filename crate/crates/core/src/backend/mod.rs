//! Triple retrieval over a knowledge graph.

mod memory;
mod sparql;

use std::collections::HashMap;
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntityRef, RelationRef};

pub use memory::InMemoryStore;
pub use sparql::{render_sparql, SparqlBackend, SparqlTemplate, FREEBASE_PREFIX};

/// Environment variable that overrides the configured SPARQL endpoint.
pub const ENDPOINT_ENV: &str = "KGPATH_SPARQL_ENDPOINT";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("query rejected: {0}")]
    QueryRejected(String),
    #[error("bad binding {0:?}: identifiers may not contain whitespace or quotes")]
    BadBinding(String),
    #[error("cannot read store file {path}: {reason}")]
    Unreadable { path: String, reason: String },
}

/// Read-only access to a triple store.
///
/// `head_relations(e)` lists relations r with (e, r, ?) in the graph and
/// `tail_entities(e, r)` the matching tails; the `tail_`/`head_` mirrors do
/// the same with `e` in tail position.
pub trait KnowledgeBackend: Send + Sync {
    fn head_relations(&self, e: &EntityRef) -> Result<Vec<RelationRef>, BackendError>;
    fn tail_relations(&self, e: &EntityRef) -> Result<Vec<RelationRef>, BackendError>;
    fn tail_entities(&self, e: &EntityRef, r: &RelationRef)
        -> Result<Vec<EntityRef>, BackendError>;
    fn head_entities(&self, e: &EntityRef, r: &RelationRef)
        -> Result<Vec<EntityRef>, BackendError>;
    /// Returns `e` with its label filled in; unnamed entities get label = id.
    fn resolve_label(&self, e: &EntityRef) -> Result<EntityRef, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
    /// Cap on rows per query; applied as a `LIMIT` clause on the wire.
    pub result_limit: usize,
    /// Relation-name prefixes to drop from relation listings.
    pub denylist: Vec<String>,
    /// Predicate carrying human-readable names.
    pub name_predicate: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://localhost:8890/sparql".to_string(),
            timeout: Duration::from_secs(30),
            result_limit: 200,
            denylist: Vec::new(),
            name_predicate: "type.object.name".to_string(),
        }
    }
}

impl BackendConfig {
    /// Optional filter for Freebase bookkeeping relations. Off by default.
    pub fn freebase_meta_denylist() -> Vec<String> {
        ["type.", "common.", "freebase.", "kg.", "base.kwebbase."]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    pub fn allows(&self, r: &RelationRef) -> bool {
        !self.denylist.iter().any(|p| r.name.starts_with(p.as_str()))
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// Per-run label cache; concurrent readers, serialized writers.
#[derive(Debug, Default)]
pub(crate) struct LabelCache {
    inner: RwLock<HashMap<String, String>>,
}

impl LabelCache {
    pub(crate) fn get(&self, id: &str) -> Option<String> {
        self.inner.read().ok()?.get(id).cloned()
    }

    pub(crate) fn put(&self, id: &str, label: &str) {
        if let Ok(mut map) = self.inner.write() {
            map.insert(id.to_string(), label.to_string());
        }
    }
}

/// Identifiers are spliced into query text, so anything that could break out
/// of a prefixed name is refused.
pub fn check_binding(id: &str) -> Result<(), BackendError> {
    if id.is_empty()
        || id
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '<' | '>' | '{' | '}'))
    {
        Err(BackendError::BadBinding(id.to_string()))
    } else {
        Ok(())
    }
}
