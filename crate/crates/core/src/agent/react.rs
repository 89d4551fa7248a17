use super::backend::ChatBackend;
use super::tools::{ToolContext, ToolRegistry};
use super::wire::{ChatMessage, ChatRequest, WireTool};
use super::{AgentConfig, AgentError, SYSTEM_PROMPT};
use crate::optimizer::DeploymentPlan;
use crate::pipeline::{read_plan, PLAN_FILE, TRANSCRIPT_FILE};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub call_id: String,
    pub tool_name: String,
    /// Decoded arguments; undecodable argument text is kept as a string.
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub index: usize,
    pub thought: String,
    #[serde(default)]
    pub action: Option<ToolCall>,
    #[serde(default)]
    pub observation: Option<Value>,
    #[serde(default)]
    pub final_answer: Option<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct AgentRun {
    pub status: RunStatus,
    pub final_answer: String,
    pub plan: Option<DeploymentPlan>,
    pub transcript: Vec<TranscriptStep>,
}

/// A run aborted by a backend failure. The steps taken so far are kept, in
/// memory and in the transcript file.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct AgentFailure {
    #[source]
    pub error: AgentError,
    pub transcript: Vec<TranscriptStep>,
}

struct TranscriptWriter {
    path: PathBuf,
    file: File,
}

impl TranscriptWriter {
    fn create(path: PathBuf) -> Result<Self, AgentError> {
        match File::create(&path) {
            Ok(file) => Ok(Self { path, file }),
            Err(source) => Err(AgentError::Transcript { path, source }),
        }
    }

    fn append(&mut self, step: &TranscriptStep) -> Result<(), AgentError> {
        let line = serde_json::to_string(step).expect("step serialises");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|source| AgentError::Transcript {
                path: self.path.clone(),
                source,
            })
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or_default()
}

/// Reads a transcript file back.
pub fn read_transcript(text: &str) -> Result<Vec<TranscriptStep>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Drives the tools through the backend until it answers without a tool
/// call or `max_steps` replies have been consumed. Only the first tool call
/// of a reply is executed; any others are answered with an error message.
pub fn run_react_loop(
    task: &str,
    cfg: &AgentConfig,
    backend: &mut dyn ChatBackend,
    registry: &ToolRegistry,
    ctx: &mut ToolContext,
) -> Result<AgentRun, AgentFailure> {
    let mut transcript = Vec::new();
    let mut writer = match TranscriptWriter::create(ctx.workspace.path(TRANSCRIPT_FILE)) {
        Ok(w) => w,
        Err(error) => return Err(AgentFailure { error, transcript }),
    };
    let tools: Vec<WireTool> = registry
        .specs()
        .into_iter()
        .map(|function| WireTool {
            kind: "function".into(),
            function,
        })
        .collect();
    let mut messages = vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(task)];
    let mut answer = None;

    while transcript.len() < cfg.max_steps {
        let request = ChatRequest {
            model: cfg.model_name.clone(),
            messages: messages.clone(),
            tools: tools.clone(),
            temperature: cfg.temperature,
        };
        let reply = match backend.complete(&request) {
            Ok(r) => r,
            Err(error) => return Err(AgentFailure { error, transcript }),
        };
        messages.push(reply.to_wire());
        let index = transcript.len();
        let thought = reply.content.clone().unwrap_or_default();

        let step = match reply.tool_calls.split_first() {
            None => {
                answer = Some(thought.clone());
                TranscriptStep {
                    index,
                    thought: String::new(),
                    action: None,
                    observation: None,
                    final_answer: Some(thought),
                    timestamp: now(),
                }
            }
            Some((call, rest)) => {
                let (arguments, observation) = match serde_json::from_str::<Value>(&call.arguments)
                {
                    Ok(args) => {
                        let (obs, _) = registry.execute(&call.name, &args, ctx);
                        (args, obs)
                    }
                    Err(e) => {
                        let err = AgentError::MalformedArguments {
                            call_id: call.id.clone(),
                            error: e.to_string(),
                        };
                        (
                            Value::String(call.arguments.clone()),
                            json!({"error": err.to_string()}),
                        )
                    }
                };
                messages.push(ChatMessage::tool(&call.id, observation.to_string()));
                for extra in rest {
                    let obs = json!({"error": "only one tool call is executed per step; call it again in a later step"});
                    messages.push(ChatMessage::tool(&extra.id, obs.to_string()));
                }
                TranscriptStep {
                    index,
                    thought,
                    action: Some(ToolCall {
                        call_id: call.id.clone(),
                        tool_name: call.name.clone(),
                        arguments,
                    }),
                    observation: Some(observation),
                    final_answer: None,
                    timestamp: now(),
                }
            }
        };
        if let Err(error) = writer.append(&step) {
            return Err(AgentFailure { error, transcript });
        }
        transcript.push(step);
        if answer.is_some() {
            break;
        }
    }

    let plan_path = ctx.workspace.path(PLAN_FILE);
    let plan = if plan_path.exists() {
        read_plan(&plan_path).ok()
    } else {
        None
    };
    let (status, final_answer) = match answer {
        Some(a) => (RunStatus::Completed, a),
        None => (
            RunStatus::StepLimit,
            step_limit_summary(&transcript, plan.as_ref()),
        ),
    };
    Ok(AgentRun {
        status,
        final_answer,
        plan,
        transcript,
    })
}

fn step_limit_summary(transcript: &[TranscriptStep], plan: Option<&DeploymentPlan>) -> String {
    let calls: Vec<&str> = transcript
        .iter()
        .filter_map(|s| s.action.as_ref().map(|a| a.tool_name.as_str()))
        .collect();
    let mut text = format!(
        "Step limit reached after {} steps without a final answer. Tool calls: {}.",
        transcript.len(),
        if calls.is_empty() {
            "none".to_string()
        } else {
            calls.join(", ")
        }
    );
    if let Some(p) = plan {
        let status = p
            .status
            .map(|s| format!("{s:?}"))
            .unwrap_or_else(|| "unknown".into());
        text.push_str(&format!(
            " Last plan: status {status}, {} sites, cost {} units.",
            p.opened_sites.len(),
            p.total_cost_units
        ));
    }
    text
}
