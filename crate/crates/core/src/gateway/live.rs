use std::time::Duration;

use serde_json::{json, Value};

use super::{AgentError, AgentGateway, PromptKind};

/// Environment variable holding the bearer token for the chat endpoint.
pub const API_KEY_ENV: &str = "KGPATH_API_KEY";
/// Environment variable that overrides the configured chat endpoint.
pub const CHAT_ENDPOINT_ENV: &str = "KGPATH_CHAT_ENDPOINT";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveAgentConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub timeout: Duration,
}

impl Default for LiveAgentConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            model_name: "gpt-3.5-turbo".to_string(),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Chat-completion client. Requests are independent, so one instance can
/// serve concurrent questions.
pub struct LiveAgent {
    config: LiveAgentConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl LiveAgent {
    pub fn new(mut config: LiveAgentConfig) -> Self {
        if let Ok(url) = std::env::var(CHAT_ENDPOINT_ENV) {
            if !url.trim().is_empty() {
                config.endpoint_url = url.trim().to_string();
            }
        }
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            config,
            api_key,
            agent,
        }
    }

    pub fn config(&self) -> &LiveAgentConfig {
        &self.config
    }
}

// Wire adapter: the only place that knows the chat protocol's field names.
pub(crate) fn request_body(model: &str, prompt: &str, temperature: f64) -> Value {
    json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
    })
}

pub(crate) fn completion_text(body: &Value) -> Option<String> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl AgentGateway for LiveAgent {
    fn complete(&self, _kind: PromptKind, prompt: &str, temperature: f64) -> Result<String, AgentError> {
        let mut req = self
            .agent
            .post(&self.config.endpoint_url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = request_body(&self.config.model_name, prompt, temperature);
        let mut resp = req
            .send_json(&body)
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        if status >= 400 {
            let excerpt: String = text.chars().take(300).collect();
            return Err(AgentError::Transport(format!("HTTP {status}: {excerpt}")));
        }
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| AgentError::Protocol(e.to_string()))?;
        completion_text(&doc).ok_or_else(|| AgentError::Protocol("response has no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let body = request_body("m", "hello", 0.4);
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["content"], "hello");
        assert_eq!(body["temperature"], 0.4);
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(completion_text(&reply).as_deref(), Some("hi"));
        assert_eq!(completion_text(&json!({})), None);
    }
}
