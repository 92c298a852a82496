//! Entities, relations, triples and directed reasoning paths.
//!
//! Paths serialize to the arrow notation used throughout prompts and reports:
//! `A → r1 → B ← r2 ← C`. A forward step means the preceding entity is the
//! head of the underlying triple; a backward step means it is the tail.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("empty identifier")]
    EmptyIdentifier,
}

/// A knowledge-graph entity. Identity (equality, ordering, hashing) is the
/// machine id; the label is display-only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl EntityRef {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: None,
        }
    }

    pub fn labeled(id: impl Into<String>, label: impl Into<String>) -> Self {
        let label = label.into();
        Self {
            id: id.into(),
            label: if label.is_empty() { None } else { Some(label) },
        }
    }

    /// Label when present, otherwise the id.
    pub fn display(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.id)
    }

    pub fn is_valid(&self) -> bool {
        !self.id.is_empty() && self.label.as_ref().is_none_or(|l| !l.is_empty())
    }
}

impl PartialEq for EntityRef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for EntityRef {}

impl Hash for EntityRef {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl PartialOrd for EntityRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EntityRef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationRef {
    pub name: String,
}

impl RelationRef {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into() }
    }

    pub fn as_str(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for RelationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityRef,
    pub relation: RelationRef,
    pub tail: EntityRef,
}

impl Triple {
    pub fn new(head: EntityRef, relation: RelationRef, tail: EntityRef) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.head.is_valid() && !self.relation.name.is_empty() && self.tail.is_valid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Forward => "→",
            Direction::Backward => "←",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub direction: Direction,
    pub relation: RelationRef,
    pub entity: EntityRef,
}

impl PathStep {
    pub fn new(direction: Direction, relation: RelationRef, entity: EntityRef) -> Self {
        Self {
            direction,
            relation,
            entity,
        }
    }
}

/// Where a path came from: the agent's own knowledge or graph exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathSource {
    Internal,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub origin: EntityRef,
    pub steps: Vec<PathStep>,
    pub source: PathSource,
}

impl ReasoningPath {
    pub fn new(origin: EntityRef, source: PathSource) -> Self {
        Self {
            origin,
            steps: Vec::new(),
            source,
        }
    }

    pub fn hops(&self) -> usize {
        self.steps.len()
    }

    /// The entity at the far end of the path.
    pub fn tail(&self) -> &EntityRef {
        self.steps.last().map_or(&self.origin, |s| &s.entity)
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRef> {
        std::iter::once(&self.origin).chain(self.steps.iter().map(|s| &s.entity))
    }

    pub fn contains_entity(&self, e: &EntityRef) -> bool {
        self.entities().any(|x| x == e)
    }

    /// The triples this path walks, oriented as stored in the graph.
    pub fn triples(&self) -> Vec<(Triple, Direction)> {
        let mut prev = &self.origin;
        let mut out = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let t = match step.direction {
                Direction::Forward => {
                    Triple::new(prev.clone(), step.relation.clone(), step.entity.clone())
                }
                Direction::Backward => {
                    Triple::new(step.entity.clone(), step.relation.clone(), prev.clone())
                }
            };
            out.push((t, step.direction));
            prev = &step.entity;
        }
        out
    }

    pub fn render(&self) -> String {
        render_path(self)
    }
}

impl fmt::Display for ReasoningPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_path(self))
    }
}

/// Label-preferred arrow rendering of a path.
pub fn render_path(path: &ReasoningPath) -> String {
    let mut out = String::from(path.origin.display());
    for step in &path.steps {
        let arrow = step.direction.arrow();
        out.push(' ');
        out.push_str(arrow);
        out.push(' ');
        out.push_str(step.relation.as_str());
        out.push(' ');
        out.push_str(arrow);
        out.push(' ');
        out.push_str(step.entity.display());
    }
    out
}

const MARKERS: [(&str, Direction); 4] = [
    ("→", Direction::Forward),
    ("->", Direction::Forward),
    ("←", Direction::Backward),
    ("<-", Direction::Backward),
];

fn next_marker(text: &str) -> Option<(usize, usize, Direction)> {
    MARKERS
        .iter()
        .filter_map(|(m, d)| text.find(m).map(|pos| (pos, m.len(), *d)))
        .min_by_key(|(pos, _, _)| *pos)
}

/// Parses arrow notation back into a path. Parsed entities carry the token
/// text as their id and no label.
pub fn parse_path(text: &str, source: PathSource) -> Result<ReasoningPath, ModelError> {
    let mut segments: Vec<&str> = Vec::new();
    let mut markers: Vec<Direction> = Vec::new();
    let mut rest = text;
    while let Some((pos, len, dir)) = next_marker(rest) {
        segments.push(rest[..pos].trim());
        markers.push(dir);
        rest = &rest[pos + len..];
    }
    segments.push(rest.trim());

    if let Some(i) = segments.iter().position(|s| s.is_empty()) {
        return Err(ModelError::MalformedPath(format!(
            "empty token at position {i} in {text:?}"
        )));
    }
    if segments.len().is_multiple_of(2) {
        return Err(ModelError::MalformedPath(format!(
            "tokens do not alternate entity/relation in {text:?}"
        )));
    }

    let mut path = ReasoningPath::new(EntityRef::new(segments[0]), source);
    for k in 0..(segments.len() - 1) / 2 {
        let (before, after) = (markers[2 * k], markers[2 * k + 1]);
        if before != after {
            return Err(ModelError::MalformedPath(format!(
                "mixed direction markers around {:?}",
                segments[2 * k + 1]
            )));
        }
        path.steps.push(PathStep::new(
            before,
            RelationRef::new(segments[2 * k + 1]),
            EntityRef::new(segments[2 * k + 2]),
        ));
    }
    Ok(path)
}

/// The paths explored outward from one topic entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub topic: EntityRef,
    pub paths: Vec<ReasoningPath>,
}

impl Subgraph {
    /// A round-0 subgraph: the bare topic entity as a zero-hop path.
    pub fn seed(topic: EntityRef) -> Self {
        let root = ReasoningPath::new(topic.clone(), PathSource::External);
        Self {
            topic,
            paths: vec![root],
        }
    }

    /// Longest path length, i.e. the exploration depth reached.
    pub fn round(&self) -> usize {
        self.paths.iter().map(|p| p.hops()).max().unwrap_or(0)
    }

    /// Adds a path unless an identical one is already present.
    pub fn insert(&mut self, path: ReasoningPath) -> bool {
        if self.paths.contains(&path) {
            false
        } else {
            self.paths.push(path);
            true
        }
    }

    pub fn render(&self) -> String {
        self.paths
            .iter()
            .map(render_path)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Deduplicated triples of a subgraph in (head, relation, tail) order, each
/// with the direction it was first traversed in.
pub fn subgraph_triples(g: &Subgraph) -> Vec<(Triple, Direction)> {
    collect_triples(std::slice::from_ref(g))
}

pub fn collect_triples(subgraphs: &[Subgraph]) -> Vec<(Triple, Direction)> {
    let mut seen: BTreeMap<Triple, Direction> = BTreeMap::new();
    for g in subgraphs {
        for p in &g.paths {
            for (t, d) in p.triples() {
                seen.entry(t).or_insert(d);
            }
        }
    }
    seen.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fwd(r: &str, e: &str) -> PathStep {
        PathStep::new(Direction::Forward, RelationRef::new(r), EntityRef::new(e))
    }

    fn bwd(r: &str, e: &str) -> PathStep {
        PathStep::new(Direction::Backward, RelationRef::new(r), EntityRef::new(e))
    }

    fn path(origin: &str, steps: Vec<PathStep>) -> ReasoningPath {
        ReasoningPath {
            origin: EntityRef::new(origin),
            steps,
            source: PathSource::External,
        }
    }

    #[test]
    fn renders_canberra_example() {
        let p = ReasoningPath {
            origin: EntityRef::labeled("x1", "Country associated with Canberra"),
            steps: vec![
                PathStep::new(
                    Direction::Forward,
                    RelationRef::new("has capital"),
                    EntityRef::labeled("x2", "Canberra"),
                ),
                PathStep::new(
                    Direction::Forward,
                    RelationRef::new("has majority party"),
                    EntityRef::labeled("x3", "Australian Labor Party"),
                ),
            ],
            source: PathSource::Internal,
        };
        assert_eq!(
            render_path(&p),
            "Country associated with Canberra → has capital → Canberra → has majority party → Australian Labor Party"
        );
    }

    #[test]
    fn renders_zero_hop_and_backward() {
        assert_eq!(render_path(&path("A", vec![])), "A");
        assert_eq!(render_path(&path("A", vec![bwd("r", "B")])), "A ← r ← B");
    }

    #[test]
    fn label_falls_back_to_id() {
        let e = EntityRef::new("m.0d05w3");
        assert_eq!(e.display(), "m.0d05w3");
        assert_eq!(EntityRef::labeled("m.1", "").label, None);
    }

    #[test]
    fn parses_forward_path() {
        let p = parse_path("A → r1 → B → r2 → C", PathSource::Internal).unwrap();
        assert_eq!(p.hops(), 2);
        assert!(p.steps.iter().all(|s| s.direction == Direction::Forward));
        assert_eq!(p.tail().id, "C");
    }

    #[test]
    fn parses_ascii_arrows_without_spaces() {
        let p = parse_path("A->r1->B<-r2<-C", PathSource::Internal).unwrap();
        assert_eq!(p, {
            let mut q = path("A", vec![fwd("r1", "B"), bwd("r2", "C")]);
            q.source = PathSource::Internal;
            q
        });
    }

    #[test]
    fn hyphenated_labels_are_not_arrows() {
        let p = parse_path(
            "Liverpool F.C. ← winner ← 2002-03-Football League Cup",
            PathSource::External,
        )
        .unwrap();
        assert_eq!(p.tail().id, "2002-03-Football League Cup");
    }

    #[test]
    fn rejects_missing_relation() {
        assert!(matches!(
            parse_path("A → B", PathSource::Internal),
            Err(ModelError::MalformedPath(_))
        ));
        assert!(parse_path("A → r →", PathSource::Internal).is_err());
        assert!(parse_path("", PathSource::Internal).is_err());
        assert!(parse_path("A → r ← B", PathSource::Internal).is_err());
    }

    #[test]
    fn backward_step_yields_reversed_triple() {
        let mut g = Subgraph::seed(EntityRef::new("A"));
        g.paths = vec![path("A", vec![bwd("r", "B")])];
        let ts = subgraph_triples(&g);
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].0.head.id, "B");
        assert_eq!(ts[0].0.tail.id, "A");
        assert_eq!(ts[0].1, Direction::Backward);
    }

    #[test]
    fn shared_edges_are_deduplicated() {
        let mut g = Subgraph::seed(EntityRef::new("A"));
        g.paths = vec![
            path("A", vec![fwd("r", "B"), fwd("s", "C")]),
            path("A", vec![fwd("r", "B"), fwd("t", "D")]),
        ];
        assert_eq!(subgraph_triples(&g).len(), 3);
        assert_eq!(g.round(), 2);
    }

    #[test]
    fn subgraph_insert_dedups_whole_paths() {
        let mut g = Subgraph::seed(EntityRef::new("A"));
        assert!(!g.insert(path("A", vec![])));
        assert!(g.insert(path("A", vec![fwd("r", "B")])));
        assert!(!g.insert(path("A", vec![fwd("r", "B")])));
        assert_eq!(g.paths.len(), 2);
    }

    #[test]
    fn entity_identity_ignores_label() {
        assert_eq!(EntityRef::labeled("m.1", "X"), EntityRef::labeled("m.1", "Y"));
        assert_ne!(EntityRef::new("m.1"), EntityRef::new("m.2"));
    }
}
