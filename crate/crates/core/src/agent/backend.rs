use super::wire::{AssistantMessage, ChatRequest, ChatResponse, RawToolCall};
use super::{AgentConfig, AgentError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::time::Duration;

/// Anything that can answer a chat-completions request.
pub trait ChatBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<AssistantMessage, AgentError>;
}

/// One tool call in a script. `arguments` is normally an object; a string is
/// passed through verbatim, which lets a script send malformed JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedReply {
    #[serde(default)]
    pub content: Option<String>,
    #[serde(default)]
    pub tool_calls: Option<Vec<ScriptedCall>>,
}

/// Replays a fixed list of assistant replies in order.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    replies: Vec<ScriptedReply>,
    next: usize,
}

impl ScriptedBackend {
    pub fn new(replies: Vec<ScriptedReply>) -> Self {
        Self { replies, next: 0 }
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        serde_json::from_str(text)
            .map(Self::new)
            .map_err(|e| AgentError::Script(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AgentError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Call id the script assigns to call `k` of reply `reply`.
    pub fn call_id(reply: usize, k: usize) -> String {
        format!("call_{reply}_{k}")
    }

    pub fn reply_message(reply: usize, r: &ScriptedReply) -> AssistantMessage {
        AssistantMessage {
            content: r.content.clone(),
            tool_calls: r
                .tool_calls
                .iter()
                .flatten()
                .enumerate()
                .map(|(k, c)| RawToolCall {
                    id: Self::call_id(reply, k),
                    name: c.name.clone(),
                    arguments: match &c.arguments {
                        Value::String(s) => s.clone(),
                        Value::Null => "{}".into(),
                        v => v.to_string(),
                    },
                })
                .collect(),
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&mut self, _request: &ChatRequest) -> Result<AssistantMessage, AgentError> {
        let r = self
            .replies
            .get(self.next)
            .ok_or(AgentError::ScriptExhausted(self.replies.len()))?;
        let msg = Self::reply_message(self.next, r);
        self.next += 1;
        Ok(msg)
    }
}

/// OpenAI-compatible endpoint over HTTP.
pub struct HttpBackend {
    url: String,
    api_key: String,
    retries: usize,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable; fails
    /// before any request when it is unset.
    pub fn new(cfg: &AgentConfig) -> Result<Self, AgentError> {
        let endpoint = cfg
            .endpoint_url
            .as_deref()
            .ok_or(AgentError::MissingEndpoint)?;
        let api_key = std::env::var(&cfg.api_key_env_var)
            .map_err(|_| AgentError::MissingApiKey(cfg.api_key_env_var.clone()))?;
        Ok(Self::with_key(endpoint, api_key, cfg))
    }

    pub fn with_key(endpoint: &str, api_key: String, cfg: &AgentConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: completions_url(endpoint),
            api_key,
            retries: cfg.retries,
            agent,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, body: &str) -> Result<AssistantMessage, AgentError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(AgentError::HttpStatus { status, body: text });
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| AgentError::MalformedResponse("no choices in response".into()))?;
        Ok(AssistantMessage::from_wire(choice.message))
    }
}

/// `{endpoint}/v1/chat/completions`, unless the endpoint already names the path.
pub fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<AssistantMessage, AgentError> {
        let body = serde_json::to_string(request).expect("request serialises");
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    attempt += 1;
                    log::warn!(
                        "backend request failed ({e}); retry {attempt}/{}",
                        self.retries
                    );
                    std::thread::sleep(Duration::from_millis(100 * attempt as u64));
                }
                other => return other,
            }
        }
    }
}
