//! Model backends behind one interface.
//!
//! [`ChatBackend`] is implemented by the chat-completions wire client, the
//! scripted playbook, and a seeded stochastic agent. [`Gateway`] wraps any of
//! them with retries, a concurrency cap, pricing, and `ModelCall` tracing.

pub mod playbook;
pub mod stochastic;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use crate::config::{Pricing, RunConfig};
use crate::domain::{Caller, EntryPoint};
use crate::money::Usd;
use crate::trace::{EventBody, ModelCall, TraceSink};

pub use playbook::{load_playbook, Playbook, PlaybookError};
pub use stochastic::Stochastic;
pub use wire::WireClient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
    /// Critic interjection; sent to providers as a user message.
    CriticNote,
}

impl Role {
    pub fn wire_name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User | Role::CriticNote => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl Message {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn critic_note(content: impl Into<String>) -> Self {
        Self::plain(Role::CriticNote, content)
    }

    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Message {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.into()),
        }
    }

    /// First 12 hex chars of the SHA-256 of role and content.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.role.wire_name().as_bytes());
        h.update([0]);
        h.update(self.content.as_bytes());
        for c in &self.tool_calls {
            h.update(c.name.as_bytes());
            h.update(c.arguments.to_string().as_bytes());
        }
        hex::encode(&h.finalize()[..6])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

/// Routing metadata that travels with a request but never reaches the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct CallContext {
    pub caller: Caller,
    pub agent_id: Option<String>,
    pub agent_index: Option<u32>,
    pub round: Option<u32>,
    pub extensions: u32,
    pub entrypoint: Option<EntryPoint>,
}

impl CallContext {
    pub fn new(caller: Caller) -> Self {
        CallContext {
            caller,
            agent_id: None,
            agent_index: None,
            round: None,
            extensions: 0,
            entrypoint: None,
        }
    }
}

impl Default for CallContext {
    fn default() -> Self {
        CallContext::new(Caller::Agent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    #[serde(default)]
    pub tools: Vec<ToolSchema>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(skip)]
    pub context: CallContext,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>, context: CallContext) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            tools: Vec::new(),
            temperature: 0.0,
            max_output_tokens: 4096,
            context,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.first() {
            None => Err(BackendError::InvalidRequest("messages are empty".into())),
            Some(m) if m.role != Role::System => Err(BackendError::InvalidRequest(
                "first message must be the system prompt".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn last_content(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishKind {
    Stop,
    ToolCalls,
    Length,
}

impl FinishKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FinishKind::Stop => "stop",
            FinishKind::ToolCalls => "tool_calls",
            FinishKind::Length => "length",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub message: Message,
    pub usage: Usage,
    pub finish_kind: FinishKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("http status {0}: {1}")]
    HttpStatus(u16, String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    pub fn retryable(&self) -> bool {
        !matches!(self, BackendError::InvalidRequest(_))
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;

    /// Short name recorded in the trace.
    fn describe(&self) -> String;

    /// What a replay needs to rebuild this backend, if it is reproducible.
    fn replay_info(&self) -> Option<Value> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("backend failed after {attempts} attempt(s): {last}")]
pub struct GatewayError {
    pub attempts: u32,
    pub last: BackendError,
}

/// Successful call with its priced usage.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub response: ChatResponse,
    pub cost: Usd,
    pub attempts: u32,
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.saturating_sub(1).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Shared front for all model traffic.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    pricing: Arc<BTreeMap<String, Pricing>>,
    permits: Arc<Semaphore>,
    retry: RetryPolicy,
    trace: TraceSink,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, config: &RunConfig, trace: TraceSink) -> Self {
        Gateway {
            backend,
            pricing: Arc::new(config.pricing.clone()),
            permits: Arc::new(Semaphore::new(config.max_concurrent_requests.max(1) as usize)),
            retry: RetryPolicy::default(),
            trace,
            model: config.model.clone(),
            temperature: config.temperature,
            max_output_tokens: config.max_output_tokens,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn backend(&self) -> &Arc<dyn ChatBackend> {
        &self.backend
    }

    pub fn trace(&self) -> &TraceSink {
        &self.trace
    }

    /// Request with this gateway's model and generation settings.
    pub fn request(&self, messages: Vec<Message>, tools: Vec<ToolSchema>, ctx: CallContext) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            tools,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            context: ctx,
        }
    }

    pub fn price(&self, model: &str, usage: Usage) -> Usd {
        self.pricing
            .get(model)
            .map(|p| p.cost(usage.input_tokens, usage.output_tokens))
            .unwrap_or(Usd::ZERO)
    }

    /// Runs the request with up to `max_attempts` tries. Only the successful
    /// attempt is priced and traced, so failures never charge a ledger.
    pub async fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        request.validate().map_err(|last| GatewayError { attempts: 0, last })?;
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.complete(request).await {
                Ok(response) => {
                    let cost = self.price(&request.model, response.usage);
                    self.emit(request, &response, cost, attempt);
                    return Ok(Completion {
                        response,
                        cost,
                        attempts: attempt,
                    });
                }
                Err(e) if e.retryable() && attempt < self.retry.max_attempts => {
                    let wait = match &e {
                        BackendError::RateLimited { retry_after: Some(d) } => {
                            (*d).min(self.retry.max_delay)
                        }
                        _ => self.retry.delay_for(attempt),
                    };
                    tracing::warn!(attempt, error = %e, "model call failed, retrying");
                    tokio::time::sleep(wait).await;
                }
                Err(last) => {
                    return Err(GatewayError {
                        attempts: attempt,
                        last,
                    })
                }
            }
        }
    }

    fn emit(&self, req: &ChatRequest, resp: &ChatResponse, cost: Usd, attempts: u32) {
        let ctx = &req.context;
        self.trace.emit(EventBody::ModelCall(ModelCall {
            caller: ctx.caller,
            agent_id: ctx.agent_id.clone(),
            entrypoint: ctx.entrypoint.as_ref().map(EntryPoint::key),
            model: req.model.clone(),
            round: ctx.round,
            input_tokens: resp.usage.input_tokens,
            output_tokens: resp.usage.output_tokens,
            cost,
            attempts,
            finish_kind: resp.finish_kind.as_str().into(),
            message_digests: req.messages.iter().map(Message::digest).collect(),
        }));
    }
}
