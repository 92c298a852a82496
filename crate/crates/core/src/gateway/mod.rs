//! LLM agent access: prompt templates, response parsers, and the metered
//! per-question [`Session`] every engine call goes through.

mod live;
mod parse;
mod prompts;
mod scripted;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metering::{CostLedger, TokenCounter};

pub use live::{LiveAgent, LiveAgentConfig, API_KEY_ENV, CHAT_ENDPOINT_ENV};
pub use parse::{
    extract_array, extract_json_object, parse_entity_selection, parse_evaluation, parse_ipg,
    parse_relation_selection, IpgParse, ParseError,
};
pub use prompts::{quoted_list, render_prompt, PromptBindings, PromptError};
pub use scripted::{ScriptRecord, ScriptedAgent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptKind {
    #[serde(rename = "IPG")]
    Ipg,
    RelationExploration,
    EntityExploration,
    Evaluation,
    #[serde(rename = "CoT")]
    Cot,
    #[serde(rename = "IO")]
    Io,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::Ipg,
        PromptKind::RelationExploration,
        PromptKind::EntityExploration,
        PromptKind::Evaluation,
        PromptKind::Cot,
        PromptKind::Io,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Ipg => "IPG",
            PromptKind::RelationExploration => "RelationExploration",
            PromptKind::EntityExploration => "EntityExploration",
            PromptKind::Evaluation => "Evaluation",
            PromptKind::Cot => "CoT",
            PromptKind::Io => "IO",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown prompt kind {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent transport failure: {0}")]
    Transport(String),
    #[error("agent protocol error: {0}")]
    Protocol(String),
    #[error("no script entry matches {kind} prompt: {excerpt}")]
    ScriptMismatch { kind: PromptKind, excerpt: String },
}

/// A language model that turns a prompt into text.
pub trait AgentGateway: Send + Sync {
    fn complete(&self, kind: PromptKind, prompt: &str, temperature: f64) -> Result<String, AgentError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_retries_on_malformed: u32,
    pub timeout: Duration,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            model_name: "gpt-3.5-turbo".to_string(),
            temperature: 0.4,
            max_retries_on_malformed: 2,
            timeout: Duration::from_secs(60),
        }
    }
}

/// One prompt/response exchange, kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub kind: PromptKind,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Metered access to an agent for a single question. Every `complete`
/// invocation lands in the ledger and the transcript, failed ones included.
pub struct Session<'a> {
    agent: &'a dyn AgentGateway,
    counter: &'a dyn TokenCounter,
    temperature: f64,
    max_retries: u32,
    ledger: CostLedger,
    transcript: Vec<Exchange>,
    warnings: Vec<String>,
}

impl<'a> Session<'a> {
    pub fn new(agent: &'a dyn AgentGateway, counter: &'a dyn TokenCounter, config: &AgentConfig) -> Self {
        Self {
            agent,
            counter,
            temperature: config.temperature,
            max_retries: config.max_retries_on_malformed,
            ledger: CostLedger::new(),
            transcript: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn complete(&mut self, kind: PromptKind, prompt: &str) -> Result<String, AgentError> {
        let start = Instant::now();
        let result = self.agent.complete(kind, prompt, self.temperature);
        let elapsed = start.elapsed();
        let (response, error) = match &result {
            Ok(text) => (text.clone(), None),
            Err(e) => (String::new(), Some(e.to_string())),
        };
        self.ledger.record_call(kind, prompt, &response, elapsed, self.counter);
        self.transcript.push(Exchange {
            kind,
            prompt: prompt.to_string(),
            response,
            error,
        });
        result
    }

    /// Issues `prompt` and parses the reply, re-issuing it after malformed
    /// replies up to the retry budget. `Ok(None)` means the budget ran out.
    pub fn complete_parsed<T>(
        &mut self,
        kind: PromptKind,
        prompt: &str,
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<Option<T>, AgentError> {
        for attempt in 0..=self.max_retries {
            let text = self.complete(kind, prompt)?;
            match parse(&text) {
                Ok(v) => return Ok(Some(v)),
                Err(e) => log::debug!("{kind} attempt {}: {e}", attempt + 1),
            }
        }
        self.warn(format!(
            "{kind}: no parseable response after {} attempts",
            self.max_retries + 1
        ));
        Ok(None)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn transcript(&self) -> &[Exchange] {
        &self.transcript
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn into_parts(self) -> (CostLedger, Vec<Exchange>, Vec<String>) {
        (self.ledger, self.transcript, self.warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metering::ApproxTokenCounter;

    #[test]
    fn prompt_kind_names_round_trip() {
        for k in PromptKind::ALL {
            assert_eq!(k.as_str().parse::<PromptKind>().unwrap(), k);
        }
        assert!("bogus".parse::<PromptKind>().is_err());
    }

    #[test]
    fn retries_are_metered() {
        let agent = ScriptedAgent::new(vec![
            ScriptRecord::new(PromptKind::Evaluation, "garbage"),
            ScriptRecord::new(PromptKind::Evaluation, "{}"),
            ScriptRecord::new(PromptKind::Evaluation, r#"{"Answerable": true, "Response": "x"}"#),
        ]);
        let counter = ApproxTokenCounter;
        let mut s = Session::new(&agent, &counter, &AgentConfig::default());
        let out = s.complete_parsed(PromptKind::Evaluation, "q", parse_evaluation).unwrap();
        assert_eq!(out, Some((true, "x".to_string())));
        assert_eq!(s.ledger().call_count(), 3);
        assert_eq!(s.transcript().len(), 3);
    }

    #[test]
    fn exhaustion_yields_none_and_warning() {
        let agent = ScriptedAgent::new(vec![ScriptRecord::new(PromptKind::Evaluation, "nope"); 3]);
        let counter = ApproxTokenCounter;
        let mut s = Session::new(&agent, &counter, &AgentConfig::default());
        assert_eq!(s.complete_parsed(PromptKind::Evaluation, "q", parse_evaluation).unwrap(), None);
        assert_eq!(s.ledger().call_count(), 3);
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn failed_calls_are_still_recorded() {
        let agent = ScriptedAgent::new(vec![]);
        let counter = ApproxTokenCounter;
        let mut s = Session::new(&agent, &counter, &AgentConfig::default());
        assert!(s.complete(PromptKind::Io, "q").is_err());
        assert_eq!(s.ledger().call_count(), 1);
        assert!(s.transcript()[0].error.is_some());
    }
}
