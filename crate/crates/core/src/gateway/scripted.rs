use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AgentError, AgentGateway, PromptKind};

/// One canned reply. `kind` of `None` matches any prompt kind; `contains`,
/// when set, must occur in the prompt text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    #[serde(default, with = "kind_matcher")]
    pub kind: Option<PromptKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

impl ScriptRecord {
    pub fn new(kind: PromptKind, response: impl Into<String>) -> Self {
        Self {
            kind: Some(kind),
            contains: None,
            response: response.into(),
        }
    }

    pub fn when(mut self, substring: impl Into<String>) -> Self {
        self.contains = Some(substring.into());
        self
    }

    pub fn matches(&self, kind: PromptKind, prompt: &str) -> bool {
        self.kind.is_none_or(|k| k == kind)
            && self.contains.as_deref().is_none_or(|s| prompt.contains(s))
    }
}

mod kind_matcher {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::PromptKind;

    pub fn serialize<S: Serializer>(k: &Option<PromptKind>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(k.map_or("*", |k| k.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<PromptKind>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "*" || s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

/// Replays canned replies. Each call consumes the first unconsumed record
/// that matches; a prompt nothing matches is an error, never a default.
#[derive(Debug, Default)]
pub struct ScriptedAgent {
    records: Vec<ScriptRecord>,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedAgent {
    pub fn new(records: Vec<ScriptRecord>) -> Self {
        let consumed = Mutex::new(vec![false; records.len()]);
        Self { records, consumed }
    }

    /// Reads a JSON-lines script: one record object per line; blank lines
    /// and lines starting with `#` are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: ScriptRecord =
                serde_json::from_str(line).map_err(|e| format!("script line {}: {e}", n + 1))?;
            records.push(rec);
        }
        Ok(Self::new(records))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_jsonl(&text)
    }

    pub fn to_jsonl(records: &[ScriptRecord]) -> String {
        records
            .iter()
            .filter_map(|r| serde_json::to_string(r).ok())
            .map(|l| l + "\n")
            .collect()
    }

    pub fn consumed_count(&self) -> usize {
        self.consumed
            .lock()
            .map(|c| c.iter().filter(|x| **x).count())
            .unwrap_or(0)
    }

    pub fn remaining(&self) -> usize {
        self.records.len() - self.consumed_count()
    }
}

impl AgentGateway for ScriptedAgent {
    fn complete(&self, kind: PromptKind, prompt: &str, _temperature: f64) -> Result<String, AgentError> {
        let mut consumed = self
            .consumed
            .lock()
            .map_err(|_| AgentError::Protocol("script state poisoned".into()))?;
        let idx = self
            .records
            .iter()
            .enumerate()
            .position(|(i, r)| !consumed[i] && r.matches(kind, prompt))
            .ok_or_else(|| AgentError::ScriptMismatch {
                kind,
                excerpt: prompt.chars().take(160).collect(),
            })?;
        consumed[idx] = true;
        Ok(self.records[idx].response.clone())
    }
}
