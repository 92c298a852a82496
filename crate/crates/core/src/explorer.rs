//! Directed subgraph exploration.
//!
//! Each round, for every topic entity's subgraph with a live frontier: list
//! the relations touching the frontier, let the agent pick some, list the
//! entities those relations reach, let the agent pick some, and extend the
//! producing paths by one hop. Paths that get no pick are frozen.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::KnowledgeBackend;
use crate::error::EngineError;
use crate::gateway::{
    parse_entity_selection, parse_relation_selection, quoted_list, render_prompt, PromptBindings,
    PromptKind, Session,
};
use crate::model::{Direction, EntityRef, PathStep, ReasoningPath, RelationRef, Subgraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub max_depth: usize,
    pub relation_width: usize,
    pub entity_width: usize,
    /// Cap on live paths per subgraph after each update.
    pub max_width: usize,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            relation_width: 7,
            entity_width: 7,
            max_width: 7,
        }
    }
}

/// The end of a live path that the next hop extends from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierSlot {
    pub entity: EntityRef,
    /// The frontier entity sits at the path's head, so extension prepends.
    pub path_is_head: bool,
}

/// An entity offered by the graph this round, with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub entity: EntityRef,
    pub via: RelationRef,
    /// The frontier entity is the head of the matched triple.
    pub is_head: bool,
    /// Index of the path (in its subgraph) whose frontier produced this.
    pub path_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationState {
    pub subgraphs: Vec<Subgraph>,
    /// Per subgraph: path index → frontier slot. Frozen paths have no entry.
    pub frontier: Vec<BTreeMap<usize, FrontierSlot>>,
    pub round: usize,
    pub config: ExplorerConfig,
    /// Paths added by the latest update of each subgraph.
    pub last_delta: Vec<Vec<ReasoningPath>>,
    pub errors: Vec<String>,
}

impl ExplorationState {
    /// Round-0 state: one subgraph per topic entity holding the bare entity.
    pub fn new(topics: &[EntityRef], config: ExplorerConfig) -> Self {
        let subgraphs: Vec<Subgraph> = topics.iter().cloned().map(Subgraph::seed).collect();
        let frontier = topics
            .iter()
            .map(|t| {
                BTreeMap::from([(
                    0,
                    FrontierSlot {
                        entity: t.clone(),
                        path_is_head: false,
                    },
                )])
            })
            .collect();
        Self {
            last_delta: vec![Vec::new(); subgraphs.len()],
            subgraphs,
            frontier,
            round: 0,
            config,
            errors: Vec::new(),
        }
    }

    pub fn is_live(&self, i: usize) -> bool {
        self.frontier.get(i).is_some_and(|f| !f.is_empty())
    }

    pub fn any_live(&self) -> bool {
        (0..self.subgraphs.len()).any(|i| self.is_live(i))
    }

    pub fn can_continue(&self) -> bool {
        self.round < self.config.max_depth && self.any_live()
    }

    /// Distinct frontier entities of subgraph `i` with the paths ending at each.
    fn frontier_groups(&self, i: usize) -> Vec<(EntityRef, Vec<usize>)> {
        let mut groups: Vec<(EntityRef, Vec<usize>)> = Vec::new();
        for (idx, slot) in &self.frontier[i] {
            match groups.iter_mut().find(|(e, _)| *e == slot.entity) {
                Some((_, idxs)) => idxs.push(*idx),
                None => groups.push((slot.entity.clone(), vec![*idx])),
            }
        }
        groups
    }

    fn freeze(&mut self, i: usize) {
        self.frontier[i].clear();
        self.last_delta[i].clear();
    }
}

/// Extends `path` by one hop to `e` over `r`.
///
/// | path_is_head | is_head | result                     |
/// |--------------|---------|----------------------------|
/// | false        | false   | `path + [←, r, ←, e]`      |
/// | false        | true    | `path + [→, r, →, e]`      |
/// | true         | false   | `[e, →, r, →] + path`      |
/// | true         | true    | `[e, ←, r, ←] + path`      |
pub fn update_path(
    path: &ReasoningPath,
    path_is_head: bool,
    is_head: bool,
    r: &RelationRef,
    e: &EntityRef,
) -> ReasoningPath {
    let mut out = path.clone();
    if !path_is_head {
        let dir = if is_head {
            Direction::Forward
        } else {
            Direction::Backward
        };
        out.steps.push(PathStep::new(dir, r.clone(), e.clone()));
    } else {
        let dir = if is_head {
            Direction::Backward
        } else {
            Direction::Forward
        };
        let old_origin = std::mem::replace(&mut out.origin, e.clone());
        out.steps.insert(0, PathStep::new(dir, r.clone(), old_origin));
    }
    out
}

fn exploration_bindings(state: &ExplorationState, i: usize, question: &str, knowpath: &str) -> PromptBindings {
    PromptBindings::new()
        .with("question", question)
        .with("topicEntity", state.subgraphs[i].topic.display())
        .with("knowpath_str", knowpath)
}

/// Candidate relations around the frontier of subgraph `i`, narrowed by the
/// agent. Each returned pair carries whether the frontier entity was the
/// triple's head. No agent call when the graph offers nothing.
pub fn explore_relations(
    state: &ExplorationState,
    i: usize,
    question: &str,
    knowpath: &str,
    session: &mut Session<'_>,
    backend: &dyn KnowledgeBackend,
) -> Result<Vec<(RelationRef, bool)>, EngineError> {
    let mut candidates: Vec<(RelationRef, bool)> = Vec::new();
    for (entity, _) in state.frontier_groups(i) {
        for r in backend.head_relations(&entity)? {
            if !candidates.contains(&(r.clone(), true)) {
                candidates.push((r, true));
            }
        }
        for r in backend.tail_relations(&entity)? {
            if !candidates.contains(&(r.clone(), false)) {
                candidates.push((r, false));
            }
        }
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut distinct: Vec<RelationRef> = Vec::new();
    for (r, _) in &candidates {
        if !distinct.contains(r) {
            distinct.push(r.clone());
        }
    }
    let prompt = render_prompt(
        PromptKind::RelationExploration,
        &exploration_bindings(state, i, question, knowpath)
            .with("relationList", quoted_list(distinct.iter().map(|r| r.as_str()))),
    )
    .expect("relation exploration slots are all bound");
    let width = state.config.relation_width;
    let chosen = session
        .complete_parsed(PromptKind::RelationExploration, &prompt, |t| {
            parse_relation_selection(t, &distinct, width)
        })?
        .unwrap_or_default();
    Ok(chosen
        .iter()
        .flat_map(|r| candidates.iter().filter(move |(c, _)| c == r).cloned())
        .collect())
}

/// Entities reached from the frontier over `selected`, narrowed by the agent,
/// each with the path and relation that produced it.
#[allow(clippy::too_many_arguments)]
pub fn explore_entities(
    state: &ExplorationState,
    i: usize,
    selected: &[(RelationRef, bool)],
    question: &str,
    knowpath: &str,
    session: &mut Session<'_>,
    backend: &dyn KnowledgeBackend,
) -> Result<Vec<EntityCandidate>, EngineError> {
    if selected.is_empty() {
        return Ok(Vec::new());
    }
    let mut candidates: Vec<EntityCandidate> = Vec::new();
    for (frontier_entity, path_idxs) in state.frontier_groups(i) {
        for (r, is_head) in selected {
            let found = if *is_head {
                backend.tail_entities(&frontier_entity, r)?
            } else {
                backend.head_entities(&frontier_entity, r)?
            };
            for x in found {
                let entity = backend.resolve_label(&x)?;
                for &path_index in &path_idxs {
                    candidates.push(EntityCandidate {
                        entity: entity.clone(),
                        via: r.clone(),
                        is_head: *is_head,
                        path_index,
                    });
                }
            }
        }
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut distinct: Vec<EntityRef> = Vec::new();
    for c in &candidates {
        if !distinct.contains(&c.entity) {
            distinct.push(c.entity.clone());
        }
    }
    let mut names: Vec<&str> = Vec::new();
    for e in &distinct {
        if !names.contains(&e.display()) {
            names.push(e.display());
        }
    }
    let mut relation_names: Vec<&str> = Vec::new();
    for (r, _) in selected {
        if !relation_names.contains(&r.as_str()) {
            relation_names.push(r.as_str());
        }
    }
    let prompt = render_prompt(
        PromptKind::EntityExploration,
        &exploration_bindings(state, i, question, knowpath)
            .with("relationList", quoted_list(relation_names))
            .with("entityList", quoted_list(names)),
    )
    .expect("entity exploration slots are all bound");
    let width = state.config.entity_width;
    let chosen = session
        .complete_parsed(PromptKind::EntityExploration, &prompt, |t| {
            parse_entity_selection(t, &distinct, width)
        })?
        .unwrap_or_default();
    Ok(chosen
        .iter()
        .flat_map(|e| candidates.iter().filter(move |c| c.entity == *e).cloned())
        .collect())
}

/// Applies the selections to subgraph `i`. A path with k selections becomes
/// k extended paths; a frontier path with none is frozen in place. New live
/// paths are capped at `max_width` in selection order.
pub fn update_subgraph(state: &mut ExplorationState, i: usize, selections: &[EntityCandidate]) {
    let frontier = std::mem::take(&mut state.frontier[i]);
    let old_paths = std::mem::take(&mut state.subgraphs[i].paths);

    let mut grown: Vec<(ReasoningPath, FrontierSlot)> = Vec::new();
    let mut extended = vec![false; old_paths.len()];
    for sel in selections {
        let (Some(slot), Some(base)) = (frontier.get(&sel.path_index), old_paths.get(sel.path_index)) else {
            continue;
        };
        extended[sel.path_index] = true;
        if grown.len() >= state.config.max_width {
            continue;
        }
        let path = update_path(base, slot.path_is_head, sel.is_head, &sel.via, &sel.entity);
        if grown.iter().any(|(p, _)| *p == path) {
            continue;
        }
        grown.push((
            path,
            FrontierSlot {
                entity: sel.entity.clone(),
                path_is_head: slot.path_is_head,
            },
        ));
    }

    let graph = &mut state.subgraphs[i];
    for (idx, p) in old_paths.into_iter().enumerate() {
        if !extended[idx] {
            graph.insert(p);
        }
    }
    let mut delta = Vec::new();
    let mut new_frontier = BTreeMap::new();
    for (p, slot) in grown {
        if graph.insert(p.clone()) {
            new_frontier.insert(graph.paths.len() - 1, slot);
            delta.push(p);
        }
    }
    state.frontier[i] = new_frontier;
    state.last_delta[i] = delta;
}

/// What happened during one round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub explored: usize,
    pub backend_failures: usize,
    pub agent_failures: usize,
}

/// One exploration round over every live subgraph, then `round += 1`.
/// A failing subgraph is frozen; the others carry on.
pub fn run_round(
    state: &mut ExplorationState,
    question: &str,
    knowpath: &str,
    session: &mut Session<'_>,
    backend: &dyn KnowledgeBackend,
) -> RoundReport {
    let mut report = RoundReport::default();
    if !state.can_continue() {
        return report;
    }
    for i in 0..state.subgraphs.len() {
        if !state.is_live(i) {
            continue;
        }
        report.explored += 1;
        let outcome = explore_relations(state, i, question, knowpath, session, backend).and_then(|rels| {
            explore_entities(state, i, &rels, question, knowpath, session, backend)
        });
        match outcome {
            Ok(selections) => update_subgraph(state, i, &selections),
            Err(e) => {
                match e {
                    EngineError::Backend(_) => report.backend_failures += 1,
                    _ => report.agent_failures += 1,
                }
                let msg = format!("round {} subgraph {}: {e}", state.round + 1, i);
                session.warn(msg.clone());
                state.errors.push(msg);
                state.freeze(i);
            }
        }
    }
    state.round += 1;
    report
}
