//! Minimal JSON-over-HTTP chat endpoint client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GatewayError, Message, ToolRequest, Turn};

/// Response shape spoken by the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dialect {
    /// `{text, tool_calls?}`
    #[default]
    Minimal,
    /// `{choices: [{message: {content}}]}`
    ChatCompletions,
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minimal" => Ok(Dialect::Minimal),
            "chat-completions" => Ok(Dialect::ChatCompletions),
            other => Err(format!("unknown dialect {other:?}")),
        }
    }
}

pub(crate) struct HttpClient {
    agent: ureq::Agent,
    pub endpoint_url: String,
    pub model_name: String,
    pub token: Option<String>,
    pub dialect: Dialect,
    pub max_retries: u32,
    pub timeout_s: u64,
    pub seed: Option<u64>,
    pub temperature: Option<f64>,
}

impl HttpClient {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        endpoint_url: String,
        model_name: String,
        token: Option<String>,
        dialect: Dialect,
        timeout_s: u64,
        max_retries: u32,
        seed: Option<u64>,
        temperature: Option<f64>,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(timeout_s)))
            .build()
            .into();
        Self {
            agent,
            endpoint_url,
            model_name,
            token,
            dialect,
            max_retries,
            timeout_s,
            seed,
            temperature,
        }
    }

    fn request_body(&self, messages: &[Message], tools: bool) -> Value {
        let mut body = json!({ "model": self.model_name, "messages": messages });
        if tools {
            body["tools"] = json!(["list_files", "read_file", "write_file"]);
        }
        if let Some(seed) = self.seed {
            body["seed"] = json!(seed);
        }
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        body
    }

    fn parse(&self, value: Value) -> Result<Turn, GatewayError> {
        let bad = |what: &str| GatewayError::Transport(format!("unexpected response shape: {what}"));
        match self.dialect {
            Dialect::Minimal => {
                let text = value.get("text").and_then(Value::as_str).ok_or_else(|| bad("missing text"))?;
                let tool_calls = match value.get("tool_calls") {
                    None | Some(Value::Null) => Vec::new(),
                    Some(v) => serde_json::from_value::<Vec<ToolRequest>>(v.clone())
                        .map_err(|e| bad(&e.to_string()))?,
                };
                Ok(Turn { text: text.to_string(), tool_calls })
            }
            Dialect::ChatCompletions => {
                let text = value
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("missing choices[0].message.content"))?;
                Ok(Turn { text: text.to_string(), tool_calls: Vec::new() })
            }
        }
    }

    /// One request, retried on transport failures.
    pub fn send(&self, messages: &[Message], tools: bool) -> Result<Turn, GatewayError> {
        let body = self.request_body(messages, tools);
        let mut last = GatewayError::Transport("no attempt made".into());
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                log::warn!("retrying {} (attempt {})", self.endpoint_url, attempt + 1);
            }
            let mut req = self.agent.post(&self.endpoint_url);
            if let Some(token) = &self.token {
                req = req.header("Authorization", &format!("Bearer {token}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let value: Value = resp
                        .body_mut()
                        .read_json()
                        .map_err(|e| GatewayError::Transport(e.to_string()))?;
                    return self.parse(value);
                }
                Err(ureq::Error::Timeout(_)) => {
                    last = GatewayError::Timeout { after_s: self.timeout_s };
                }
                Err(e) => last = GatewayError::Transport(e.to_string()),
            }
        }
        Err(last)
    }
}
