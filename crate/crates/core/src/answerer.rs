//! Question answering loop: inference paths, then rounds of exploration each
//! followed by one answerability check over all subgraphs. When the check
//! never passes, the agent's inferred answer is used instead.

use serde::{Deserialize, Serialize};

use crate::backend::KnowledgeBackend;
use crate::error::EngineError;
use crate::explorer::{run_round, ExplorationState, ExplorerConfig};
use crate::gateway::{
    parse_evaluation, render_prompt, AgentConfig, AgentGateway, Exchange, PromptBindings, PromptKind,
    Session,
};
use crate::ipg::{generate_inference, link_topic_entities, IpgResult, TopicMap};
use crate::metering::{CostLedger, TokenCounter};
use crate::model::Subgraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerConfig {
    /// Triples requested from inference; 0 skips inference entirely.
    pub triple_count: usize,
    pub explorer: ExplorerConfig,
    pub agent: AgentConfig,
}

impl Default for AnswerConfig {
    fn default() -> Self {
        Self {
            triple_count: 15,
            explorer: ExplorerConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerSource {
    Subgraph,
    InternalFallback,
}

impl AnswerSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerSource::Subgraph => "Subgraph",
            AnswerSource::InternalFallback => "InternalFallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub question: String,
    pub answer_text: String,
    /// Round after which the answerability check passed.
    pub answerable_round: Option<usize>,
    pub source: AnswerSource,
    /// Set when the answer is an evaluation response that was never judged
    /// answerable (inference skipped or failed, check never passed).
    pub best_effort: bool,
    pub rounds: usize,
    /// Set when every explored subgraph lost its backend in the same round.
    pub backend_failure: Option<String>,
    pub final_subgraphs: Vec<Subgraph>,
    pub ipg: IpgResult,
    pub transcript: Vec<Exchange>,
    pub ledger: CostLedger,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl AnswerOutcome {
    pub fn kinds(&self) -> Vec<PromptKind> {
        self.transcript.iter().map(|x| x.kind).collect()
    }
}

/// All subgraph paths, one per line.
pub fn render_subgraphs(subgraphs: &[Subgraph]) -> String {
    subgraphs
        .iter()
        .filter(|g| !g.paths.is_empty())
        .map(Subgraph::render)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn evaluation_prompt(subgraphs: &[Subgraph], question: &str) -> String {
    let b = PromptBindings::new()
        .with("subgraph", render_subgraphs(subgraphs))
        .with("question", question);
    render_prompt(PromptKind::Evaluation, &b).expect("evaluation slots are all bound")
}

/// One logical answerability check (plus retries). Unusable replies read as
/// `(false, "")`.
pub fn evaluate(subgraphs: &[Subgraph], question: &str, session: &mut Session<'_>) -> (bool, String) {
    let prompt = evaluation_prompt(subgraphs, question);
    match session.complete_parsed(PromptKind::Evaluation, &prompt, parse_evaluation) {
        Ok(Some(v)) => v,
        Ok(None) => (false, String::new()),
        Err(e) => {
            session.warn(format!("evaluation failed: {e}"));
            (false, String::new())
        }
    }
}

/// Everything a question needs besides the question itself.
pub struct Engine<'a> {
    pub agent: &'a dyn AgentGateway,
    pub backend: &'a dyn KnowledgeBackend,
    pub counter: &'a dyn TokenCounter,
    pub config: AnswerConfig,
}

impl<'a> Engine<'a> {
    pub fn answer(&self, question: &str, topics: &TopicMap) -> Result<AnswerOutcome, EngineError> {
        answer_question(question, topics, self.agent, self.backend, self.counter, &self.config)
    }
}

pub fn answer_question(
    question: &str,
    topics: &TopicMap,
    agent: &dyn AgentGateway,
    backend: &dyn KnowledgeBackend,
    counter: &dyn TokenCounter,
    config: &AnswerConfig,
) -> Result<AnswerOutcome, EngineError> {
    let mut session = Session::new(agent, counter, &config.agent);
    let ipg = generate_inference(question, &mut session, config.triple_count);
    let topic_entities = link_topic_entities(&ipg, topics)?;
    let knowpath = ipg.knowpath_str();

    let mut state = ExplorationState::new(&topic_entities, config.explorer);
    let mut gate: Option<(usize, String)> = None;
    let mut last_response: Option<String> = None;
    let mut errors: Vec<String> = Vec::new();
    let mut backend_failure = None;

    while state.can_continue() {
        let report = run_round(&mut state, question, &knowpath, &mut session, backend);
        if report.explored > 0 && report.backend_failures == report.explored {
            errors.push(format!("knowledge backend failed in round {}", state.round));
            backend_failure = state.errors.last().cloned();
            break;
        }
        let (answerable, response) = evaluate(&state.subgraphs, question, &mut session);
        if answerable {
            gate = Some((state.round, response));
            break;
        }
        last_response = Some(response);
    }
    errors.extend(state.errors.iter().cloned());

    let (answer_text, answerable_round, source, best_effort) = match gate {
        Some((round, text)) => (text, Some(round), AnswerSource::Subgraph, false),
        None if ipg.has_answer() => (
            ipg.internal_answer.clone(),
            None,
            AnswerSource::InternalFallback,
            false,
        ),
        None => match last_response.filter(|r| !r.is_empty()) {
            Some(text) => {
                session.warn("answer is an evaluation response that was never judged answerable");
                (text, None, AnswerSource::Subgraph, true)
            }
            None => (String::new(), None, AnswerSource::InternalFallback, false),
        },
    };

    let (ledger, transcript, warnings) = session.into_parts();
    Ok(AnswerOutcome {
        question: question.to_string(),
        answer_text,
        answerable_round,
        source,
        best_effort,
        rounds: state.round,
        backend_failure,
        final_subgraphs: state.subgraphs,
        ipg,
        transcript,
        ledger,
        warnings,
        errors,
    })
}
