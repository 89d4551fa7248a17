//! Tool-calling agent: the planning stages registered as JSON-schema tools
//! and a ReAct loop that drives them through a chat-completion backend.

mod backend;
mod react;
pub mod schema;
mod tools;
mod wire;

pub use backend::{ChatBackend, HttpBackend, ScriptedBackend, ScriptedCall, ScriptedReply};
pub use react::{
    read_transcript, run_react_loop, AgentFailure, AgentRun, RunStatus, ToolCall, TranscriptStep,
};
pub use tools::{register_planning_tools, Tool, ToolContext, ToolError, ToolRegistry, ToolSpec};
pub use wire::{
    AssistantMessage, ChatMessage, ChatRequest, ChatResponse, RawToolCall, Role, WireFunction,
    WireTool, WireToolCall,
};

use serde::{Deserialize, Serialize};

pub const SYSTEM_PROMPT: &str = include_str!("../../assets/system_prompt.md");
pub const SYSTEM_PROMPT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpEndpoint,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_steps: usize,
    pub backend: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub api_key_env_var: String,
    pub temperature: f64,
    pub timeout_s: f64,
    /// Extra attempts after a failed backend request.
    pub retries: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: 20,
            backend: BackendKind::HttpEndpoint,
            endpoint_url: None,
            model_name: "gpt-4o-mini".into(),
            api_key_env_var: "OPENAI_API_KEY".into(),
            temperature: 0.0,
            timeout_s: 120.0,
            retries: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("script exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("invalid script: {0}")]
    Script(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("no endpoint configured for the HTTP backend")]
    MissingEndpoint,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("tool call {call_id} has malformed arguments: {error}")]
    MalformedArguments { call_id: String, error: String },
    #[error("transcript {path}: {source}")]
    Transcript {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AgentError {
    /// Failures worth another request.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            AgentError::Transport(_) | AgentError::HttpStatus { .. }
        )
    }
}
