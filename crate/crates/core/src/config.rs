//! Engine settings: defaults, a TOML file, then command-line flags, each
//! layer overriding the one before it.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::answerer::AnswerConfig;
use crate::backend::BackendConfig;
use crate::error::EngineError;
use crate::evalkit::MatchPolicy;
use crate::explorer::ExplorerConfig;
use crate::gateway::{AgentConfig, LiveAgentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub max_depth: usize,
    pub triple_count: usize,
    pub temperature: f64,
    pub relation_width: usize,
    pub entity_width: usize,
    pub max_width: usize,
    pub result_limit: usize,
    /// Extra attempts after a malformed agent reply.
    pub retries: u32,
    pub model_name: String,
    pub sparql_endpoint: String,
    pub chat_endpoint: String,
    pub workers: usize,
    pub timeout_secs: u64,
    pub denylist: Vec<String>,
    pub name_predicate: String,
    pub strict_match: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let backend = BackendConfig::default();
        let live = LiveAgentConfig::default();
        let explorer = ExplorerConfig::default();
        Self {
            max_depth: 3,
            triple_count: 15,
            temperature: 0.4,
            relation_width: 7,
            entity_width: 7,
            max_width: explorer.max_width,
            result_limit: backend.result_limit,
            retries: AgentConfig::default().max_retries_on_malformed,
            model_name: live.model_name,
            sparql_endpoint: backend.endpoint_url,
            chat_endpoint: live.endpoint_url,
            workers: 4,
            timeout_secs: 60,
            denylist: Vec::new(),
            name_predicate: backend.name_predicate,
            strict_match: false,
        }
    }
}

/// One configuration layer; unset fields leave the layer below untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub max_depth: Option<usize>,
    pub triple_count: Option<usize>,
    pub temperature: Option<f64>,
    pub relation_width: Option<usize>,
    pub entity_width: Option<usize>,
    pub max_width: Option<usize>,
    pub result_limit: Option<usize>,
    pub retries: Option<u32>,
    pub model_name: Option<String>,
    pub sparql_endpoint: Option<String>,
    pub chat_endpoint: Option<String>,
    pub workers: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub denylist: Option<Vec<String>>,
    pub name_predicate: Option<String>,
    pub strict_match: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $layer:ident, $($f:ident),*) => {
        $( if let Some(v) = $layer.$f.clone() { $base.$f = v; } )*
    };
}

impl EngineConfig {
    pub fn apply(&mut self, layer: &PartialConfig) {
        overlay!(
            self, layer, max_depth, triple_count, temperature, relation_width, entity_width, max_width,
            result_limit, retries, model_name, sparql_endpoint, chat_endpoint, workers, timeout_secs,
            denylist, name_predicate, strict_match
        );
    }

    /// Defaults, then `file`, then `flags`.
    pub fn layered(file: Option<&PartialConfig>, flags: &PartialConfig) -> Result<Self, EngineError> {
        let mut c = Self::default();
        if let Some(f) = file {
            c.apply(f);
        }
        c.apply(flags);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.temperature) {
            return bad("temperature must be within [0, 1]");
        }
        if self.relation_width == 0 || self.entity_width == 0 || self.max_width == 0 {
            return bad("widths must be at least 1");
        }
        if self.result_limit == 0 {
            return bad("result_limit must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.timeout_secs == 0 {
            return bad("timeout_secs must be at least 1");
        }
        Ok(())
    }

    pub fn explorer(&self) -> ExplorerConfig {
        ExplorerConfig {
            max_depth: self.max_depth,
            relation_width: self.relation_width,
            entity_width: self.entity_width,
            max_width: self.max_width,
        }
    }

    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_retries_on_malformed: self.retries,
            timeout: Duration::from_secs(self.timeout_secs),
        }
    }

    pub fn answer(&self) -> AnswerConfig {
        AnswerConfig {
            triple_count: self.triple_count,
            explorer: self.explorer(),
            agent: self.agent(),
        }
    }

    pub fn backend(&self) -> BackendConfig {
        BackendConfig {
            endpoint_url: self.sparql_endpoint.clone(),
            timeout: Duration::from_secs(self.timeout_secs),
            result_limit: self.result_limit,
            denylist: self.denylist.clone(),
            name_predicate: self.name_predicate.clone(),
        }
    }

    pub fn live_agent(&self) -> LiveAgentConfig {
        LiveAgentConfig {
            endpoint_url: self.chat_endpoint.clone(),
            model_name: self.model_name.clone(),
            timeout: Duration::from_secs(self.timeout_secs),
        }
    }

    pub fn match_policy(&self) -> MatchPolicy {
        if self.strict_match {
            MatchPolicy::Strict
        } else {
            MatchPolicy::Normalized
        }
    }
}

pub fn parse_config(text: &str) -> Result<PartialConfig, EngineError> {
    toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<PartialConfig, EngineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
