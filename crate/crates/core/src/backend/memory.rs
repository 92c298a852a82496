use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::model::{EntityRef, RelationRef, Triple};

use super::{BackendConfig, BackendError, KnowledgeBackend, LabelCache};

type Index = BTreeMap<String, BTreeMap<String, BTreeSet<String>>>;

/// Deterministic in-memory triple store. All listings come back sorted by id.
#[derive(Debug, Default)]
pub struct InMemoryStore {
    by_head: Index,
    by_tail: Index,
    labels: HashMap<String, String>,
    config: BackendConfig,
    cache: LabelCache,
    queries: AtomicU64,
}

impl InMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_config(mut self, config: BackendConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn from_triples<I, S>(triples: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let mut store = Self::new();
        for (h, r, t) in triples {
            store.insert(h, r, t);
        }
        store
    }

    pub fn insert(&mut self, head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) {
        let (h, r, t) = (head.into(), relation.into(), tail.into());
        self.by_head
            .entry(h.clone())
            .or_default()
            .entry(r.clone())
            .or_default()
            .insert(t.clone());
        self.by_tail.entry(t).or_default().entry(r).or_default().insert(h);
    }

    pub fn set_label(&mut self, id: impl Into<String>, label: impl Into<String>) {
        self.labels.insert(id.into(), label.into());
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.by_head
            .get(&t.head.id)
            .and_then(|m| m.get(&t.relation.name))
            .is_some_and(|tails| tails.contains(&t.tail.id))
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.by_head.iter().flat_map(|(h, rels)| {
            rels.iter().flat_map(move |(r, tails)| {
                tails.iter().map(move |t| {
                    Triple::new(EntityRef::new(h), RelationRef::new(r), EntityRef::new(t))
                })
            })
        })
    }

    pub fn len(&self) -> usize {
        self.by_head
            .values()
            .flat_map(|m| m.values())
            .map(|s| s.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_head.is_empty()
    }

    /// Number of lookups served so far, label resolutions included.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Loads `head<TAB>relation<TAB>tail` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn load(triples: &Path, labels: Option<&Path>) -> Result<Self, BackendError> {
        let text = read(triples)?;
        let mut store = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [h, r, t] if !h.is_empty() && !r.is_empty() && !t.is_empty() => {
                    store.insert(*h, *r, *t)
                }
                _ => {
                    return Err(BackendError::Unreadable {
                        path: triples.display().to_string(),
                        reason: format!("line {}: expected three tab-separated fields", n + 1),
                    })
                }
            }
        }
        if let Some(path) = labels {
            let text = read(path)?;
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                match line.split_once('\t') {
                    Some((id, label)) if !id.is_empty() && !label.is_empty() => {
                        store.set_label(id, label)
                    }
                    _ => {
                        return Err(BackendError::Unreadable {
                            path: path.display().to_string(),
                            reason: format!("line {}: expected id<TAB>label", n + 1),
                        })
                    }
                }
            }
        }
        Ok(store)
    }

    fn tick(&self) {
        self.queries.fetch_add(1, Ordering::Relaxed);
    }

    fn relations(&self, index: &Index, e: &EntityRef) -> Vec<RelationRef> {
        self.tick();
        index
            .get(&e.id)
            .into_iter()
            .flat_map(|m| m.keys())
            .map(RelationRef::new)
            .filter(|r| self.config.allows(r))
            .take(self.config.result_limit)
            .collect()
    }

    fn entities(&self, index: &Index, e: &EntityRef, r: &RelationRef) -> Vec<EntityRef> {
        self.tick();
        index
            .get(&e.id)
            .and_then(|m| m.get(&r.name))
            .into_iter()
            .flatten()
            .take(self.config.result_limit)
            .map(EntityRef::new)
            .collect()
    }
}

fn read(path: &Path) -> Result<String, BackendError> {
    fs::read_to_string(path).map_err(|e| BackendError::Unreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

impl KnowledgeBackend for InMemoryStore {
    fn head_relations(&self, e: &EntityRef) -> Result<Vec<RelationRef>, BackendError> {
        Ok(self.relations(&self.by_head, e))
    }

    fn tail_relations(&self, e: &EntityRef) -> Result<Vec<RelationRef>, BackendError> {
        Ok(self.relations(&self.by_tail, e))
    }

    fn tail_entities(&self, e: &EntityRef, r: &RelationRef) -> Result<Vec<EntityRef>, BackendError> {
        Ok(self.entities(&self.by_head, e, r))
    }

    fn head_entities(&self, e: &EntityRef, r: &RelationRef) -> Result<Vec<EntityRef>, BackendError> {
        Ok(self.entities(&self.by_tail, e, r))
    }

    fn resolve_label(&self, e: &EntityRef) -> Result<EntityRef, BackendError> {
        if let Some(label) = self.cache.get(&e.id) {
            return Ok(EntityRef::labeled(e.id.clone(), label));
        }
        self.tick();
        let label = self.labels.get(&e.id).cloned().unwrap_or_else(|| e.id.clone());
        self.cache.put(&e.id, &label);
        Ok(EntityRef::labeled(e.id.clone(), label))
    }
}
