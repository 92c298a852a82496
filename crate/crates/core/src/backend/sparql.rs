use std::sync::atomic::{AtomicU64, Ordering};

use serde_json::Value;

use crate::model::{EntityRef, RelationRef};

use super::{check_binding, BackendConfig, BackendError, KnowledgeBackend, LabelCache, ENDPOINT_ENV};

pub const FREEBASE_PREFIX: &str = "http://rdf.freebase.com/ns/";

/// The four retrieval queries. Slots are filled positionally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparqlTemplate {
    /// Relations leaving an entity. Slots: entity.
    HeadRelation,
    /// Relations entering an entity. Slots: entity.
    TailRelation,
    /// Tails of `(entity, relation, ?)`. Slots: entity, relation.
    HeadEntity,
    /// Heads of `(?, relation, entity)`. Slots: relation, entity.
    TailEntity,
}

impl SparqlTemplate {
    pub const ALL: [SparqlTemplate; 4] = [
        SparqlTemplate::HeadRelation,
        SparqlTemplate::TailRelation,
        SparqlTemplate::HeadEntity,
        SparqlTemplate::TailEntity,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SparqlTemplate::HeadRelation => "head_relation",
            SparqlTemplate::TailRelation => "tail_relation",
            SparqlTemplate::HeadEntity => "head_entity",
            SparqlTemplate::TailEntity => "tail_entity",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.id() == id)
    }

    pub fn text(self) -> &'static str {
        match self {
            SparqlTemplate::HeadRelation => HEAD_RELATION,
            SparqlTemplate::TailRelation => TAIL_RELATION,
            SparqlTemplate::HeadEntity => HEAD_ENTITY,
            SparqlTemplate::TailEntity => TAIL_ENTITY,
        }
    }

    pub fn arity(self) -> usize {
        self.text().matches("%s").count()
    }
}

const HEAD_RELATION: &str = "PREFIX ns: <http://rdf.freebase.com/ns/>
SELECT DISTINCT ?relation
WHERE {
    ns:%s ?relation ?tail .
}
";

const TAIL_RELATION: &str = "PREFIX ns: <http://rdf.freebase.com/ns/>
SELECT DISTINCT ?relation
WHERE {
    ?head ?relation ns:%s .
}
";

const HEAD_ENTITY: &str = "PREFIX ns: <http://rdf.freebase.com/ns/>
SELECT DISTINCT ?Entity
WHERE {
    ns:%s ns:%s ?Entity .
}
";

const TAIL_ENTITY: &str = "PREFIX ns: <http://rdf.freebase.com/ns/>
SELECT DISTINCT ?Entity
WHERE {
    ?Entity ns:%s ns:%s .
}
";

const NAME_QUERY: &str = "PREFIX ns: <http://rdf.freebase.com/ns/>
SELECT DISTINCT ?name
WHERE {
    ns:%s ns:%s ?name .
}
";

fn substitute(template: &str, bindings: &[&str]) -> Result<String, BackendError> {
    let slots = template.matches("%s").count();
    if slots != bindings.len() {
        return Err(BackendError::BadBinding(format!(
            "expected {slots} bindings, got {}",
            bindings.len()
        )));
    }
    for b in bindings {
        check_binding(b)?;
    }
    let mut out = String::with_capacity(template.len() + 32);
    let mut parts = template.split("%s");
    out.push_str(parts.next().unwrap_or_default());
    for (part, b) in parts.zip(bindings) {
        out.push_str(b);
        out.push_str(part);
    }
    Ok(out)
}

/// Fills a template's `%s` slots. The text is otherwise reproduced verbatim;
/// the row cap is added separately by [`with_limit`].
pub fn render_sparql(template: SparqlTemplate, bindings: &[&str]) -> Result<String, BackendError> {
    substitute(template.text(), bindings)
}

/// Appends the configured row cap as a trailing `LIMIT` clause.
pub fn with_limit(query: String, limit: usize) -> String {
    format!("{query}LIMIT {limit}\n")
}

/// SPARQL 1.1 protocol client (HTTP GET, JSON results).
pub struct SparqlBackend {
    config: BackendConfig,
    agent: ureq::Agent,
    cache: LabelCache,
    requests: AtomicU64,
}

impl SparqlBackend {
    /// Builds a client; the `KGPATH_SPARQL_ENDPOINT` variable, when set,
    /// overrides `config.endpoint_url`.
    pub fn new(mut config: BackendConfig) -> Self {
        if let Ok(url) = std::env::var(ENDPOINT_ENV) {
            if !url.trim().is_empty() {
                config.endpoint_url = url.trim().to_string();
            }
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            config,
            agent,
            cache: LabelCache::default(),
            requests: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn execute(&self, query: &str) -> Result<Vec<serde_json::Map<String, Value>>, BackendError> {
        match self.execute_once(query) {
            Err(BackendError::BackendUnavailable(first)) => {
                log::warn!("sparql request failed ({first}); retrying once");
                self.execute_once(query)
            }
            other => other,
        }
    }

    fn execute_once(&self, query: &str) -> Result<Vec<serde_json::Map<String, Value>>, BackendError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut resp = self
            .agent
            .get(&self.config.endpoint_url)
            .query("query", query)
            .query("format", "json")
            .header("Accept", "application/sparql-results+json")
            .call()
            .map_err(|e| BackendError::BackendUnavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::BackendUnavailable(e.to_string()))?;
        if status >= 500 {
            return Err(BackendError::BackendUnavailable(format!("HTTP {status}: {}", snippet(&body))));
        }
        if status >= 400 {
            return Err(BackendError::QueryRejected(format!("HTTP {status}: {}", snippet(&body))));
        }
        parse_bindings(&body)
    }

    fn select(&self, template: SparqlTemplate, bindings: &[&str], var: &str) -> Result<Vec<String>, BackendError> {
        let query = with_limit(render_sparql(template, bindings)?, self.config.result_limit);
        let rows = self.execute(&query)?;
        let mut out: Vec<String> = Vec::new();
        for row in &rows {
            if let Some(id) = row.get(var).and_then(freebase_id) {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        if out.len() > self.config.result_limit {
            log::info!("truncating {} results to {}", out.len(), self.config.result_limit);
            out.truncate(self.config.result_limit);
        }
        Ok(out)
    }
}

fn snippet(body: &str) -> String {
    body.chars().take(300).collect()
}

/// Extracts `results.bindings` from a SPARQL JSON results document.
pub(crate) fn parse_bindings(body: &str) -> Result<Vec<serde_json::Map<String, Value>>, BackendError> {
    let doc: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::QueryRejected(format!("unparseable results: {e}")))?;
    let rows = doc
        .pointer("/results/bindings")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::QueryRejected("results document lacks results.bindings".into()))?;
    Ok(rows
        .iter()
        .filter_map(|r| r.as_object().cloned())
        .collect())
}

/// Strips the Freebase namespace from a URI term; other terms are skipped.
pub(crate) fn freebase_id(term: &Value) -> Option<String> {
    if term.get("type")?.as_str()? != "uri" {
        return None;
    }
    let v = term.get("value")?.as_str()?;
    v.strip_prefix(FREEBASE_PREFIX)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

fn pick_name(rows: &[serde_json::Map<String, Value>]) -> Option<String> {
    let literal = |r: &serde_json::Map<String, Value>| {
        let term = r.get("name")?;
        let value = term.get("value")?.as_str()?.to_string();
        let lang = term.get("xml:lang").and_then(Value::as_str).unwrap_or("");
        Some((lang.to_string(), value))
    };
    let names: Vec<(String, String)> = rows.iter().filter_map(literal).collect();
    names
        .iter()
        .find(|(lang, _)| lang == "en")
        .or_else(|| names.iter().find(|(lang, _)| lang.is_empty()))
        .or_else(|| names.first())
        .map(|(_, v)| v.clone())
        .filter(|v| !v.is_empty())
}

impl KnowledgeBackend for SparqlBackend {
    fn head_relations(&self, e: &EntityRef) -> Result<Vec<RelationRef>, BackendError> {
        Ok(self
            .select(SparqlTemplate::HeadRelation, &[&e.id], "relation")?
            .into_iter()
            .map(RelationRef::new)
            .filter(|r| self.config.allows(r))
            .collect())
    }

    fn tail_relations(&self, e: &EntityRef) -> Result<Vec<RelationRef>, BackendError> {
        Ok(self
            .select(SparqlTemplate::TailRelation, &[&e.id], "relation")?
            .into_iter()
            .map(RelationRef::new)
            .filter(|r| self.config.allows(r))
            .collect())
    }

    fn tail_entities(&self, e: &EntityRef, r: &RelationRef) -> Result<Vec<EntityRef>, BackendError> {
        Ok(self
            .select(SparqlTemplate::HeadEntity, &[&e.id, &r.name], "Entity")?
            .into_iter()
            .map(EntityRef::new)
            .collect())
    }

    fn head_entities(&self, e: &EntityRef, r: &RelationRef) -> Result<Vec<EntityRef>, BackendError> {
        Ok(self
            .select(SparqlTemplate::TailEntity, &[&r.name, &e.id], "Entity")?
            .into_iter()
            .map(EntityRef::new)
            .collect())
    }

    fn resolve_label(&self, e: &EntityRef) -> Result<EntityRef, BackendError> {
        if let Some(label) = self.cache.get(&e.id) {
            return Ok(EntityRef::labeled(e.id.clone(), label));
        }
        let query = with_limit(
            substitute(NAME_QUERY, &[&e.id, &self.config.name_predicate])?,
            self.config.result_limit,
        );
        let label = pick_name(&self.execute(&query)?).unwrap_or_else(|| e.id.clone());
        self.cache.put(&e.id, &label);
        Ok(EntityRef::labeled(e.id.clone(), label))
    }
}
