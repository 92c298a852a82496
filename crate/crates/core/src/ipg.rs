//! Elicits the agent's own knowledge about a question: topic entities,
//! related triples, an answer, and the reasoning paths behind it.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::gateway::{parse_ipg, render_prompt, PromptBindings, PromptKind, Session};
use crate::model::{render_path, EntityRef, ReasoningPath, Triple};

/// Topic entities as shipped with benchmark records: label → id.
pub type TopicMap = IndexMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IpgResult {
    /// Label-only entities (id = label) taken from path origins.
    pub topic_entities: Vec<EntityRef>,
    pub triples: Vec<Triple>,
    pub paths: Vec<ReasoningPath>,
    pub internal_answer: String,
    pub triple_count_requested: usize,
    /// True when no inference call was made (`n = 0`).
    pub skipped: bool,
    /// True when the call was made but nothing usable came back.
    pub failed: bool,
}

impl IpgResult {
    /// Paths rendered one per line, as they appear in exploration prompts.
    pub fn knowpath_str(&self) -> String {
        self.paths.iter().map(render_path).collect::<Vec<_>>().join("\n")
    }

    pub fn has_answer(&self) -> bool {
        !self.internal_answer.is_empty()
    }
}

pub fn ipg_prompt(question: &str, n: usize) -> String {
    let b = PromptBindings::new()
        .with("question", question)
        .with("tripleCount", n.to_string());
    render_prompt(PromptKind::Ipg, &b).expect("inference template slots are all bound")
}

/// One agent call for `n > 0`, none for `n = 0`. Failures degrade to an empty
/// result with a warning on the session.
pub fn generate_inference(question: &str, session: &mut Session<'_>, n: usize) -> IpgResult {
    let mut result = IpgResult {
        triple_count_requested: n,
        ..IpgResult::default()
    };
    if n == 0 {
        result.skipped = true;
        return result;
    }
    let prompt = ipg_prompt(question, n);
    let parsed = match session.complete_parsed(PromptKind::Ipg, &prompt, parse_ipg) {
        Ok(Some(p)) => p,
        Ok(None) => {
            result.failed = true;
            return result;
        }
        Err(e) => {
            session.warn(format!("inference paths unavailable: {e}"));
            result.failed = true;
            return result;
        }
    };
    if parsed.dropped > 0 {
        session.warn(format!("dropped {} unparseable reasoning path(s)", parsed.dropped));
    }
    for p in &parsed.paths {
        let label = p.origin.id.clone();
        if !result.topic_entities.iter().any(|e| e.id == label) {
            result.topic_entities.push(EntityRef::labeled(label.clone(), label));
        }
    }
    result.paths = parsed.paths;
    result.triples = parsed.triples;
    result.internal_answer = parsed.answer;
    result
}

/// Dataset-provided entities win when present; otherwise the inference
/// labels are used as ids.
pub fn link_topic_entities(ipg: &IpgResult, dataset: &TopicMap) -> Result<Vec<EntityRef>, EngineError> {
    if !dataset.is_empty() {
        for d in topic_discrepancies(ipg, dataset) {
            log::info!("topic entity discrepancy: {d}");
        }
        return Ok(dataset
            .iter()
            .map(|(label, id)| EntityRef::labeled(id.clone(), label.clone()))
            .collect());
    }
    if ipg.topic_entities.is_empty() {
        return Err(EngineError::NoTopicEntities);
    }
    Ok(ipg.topic_entities.clone())
}

/// Inference labels with no case-insensitive counterpart among the dataset
/// labels, and vice versa.
pub fn topic_discrepancies(ipg: &IpgResult, dataset: &TopicMap) -> Vec<String> {
    let ipg_labels: Vec<String> = ipg
        .topic_entities
        .iter()
        .map(|e| e.display().to_lowercase())
        .collect();
    let ds_labels: Vec<String> = dataset.keys().map(|k| k.to_lowercase()).collect();
    let mut out = Vec::new();
    for e in &ipg.topic_entities {
        if !ds_labels.contains(&e.display().to_lowercase()) {
            out.push(format!("inferred {:?} not in dataset", e.display()));
        }
    }
    for k in dataset.keys() {
        if !ipg_labels.contains(&k.to_lowercase()) {
            out.push(format!("dataset {k:?} not inferred"));
        }
    }
    out
}
