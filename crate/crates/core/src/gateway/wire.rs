//! Chat-completions wire client.
//!
//! Writes only `{model, messages, tools, temperature, max_tokens}` and reads
//! only `choices[0].message`, `choices[0].finish_reason` and `usage`, so any
//! gateway speaking the common JSON shape works.

use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Map, Value};

use super::{
    BackendError, ChatBackend, ChatRequest, ChatResponse, FinishKind, Message, Role, ToolCall,
    Usage,
};

pub const ENV_API_BASE: &str = "EXPLORER_API_BASE";
pub const ENV_API_KEY: &str = "EXPLORER_API_KEY";

pub struct WireClient {
    http: reqwest::Client,
    base: String,
    api_key: Option<String>,
}

impl WireClient {
    pub fn new(base: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(WireClient {
            http,
            base: base.into().trim_end_matches('/').to_string(),
            api_key,
        })
    }

    /// Reads the endpoint and credential from the environment. `base_override`
    /// (from config) wins over `EXPLORER_API_BASE`.
    pub fn from_env(base_override: Option<&str>, timeout: Duration) -> Result<Self, BackendError> {
        let base = match base_override {
            Some(b) => b.to_string(),
            None => std::env::var(ENV_API_BASE).map_err(|_| {
                BackendError::InvalidRequest(format!("{ENV_API_BASE} is not set"))
            })?,
        };
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        WireClient::new(base, key, timeout)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base)
    }
}

pub fn encode_request(req: &ChatRequest) -> Value {
    let messages: Vec<Value> = req.messages.iter().map(encode_message).collect();
    let mut body = Map::new();
    body.insert("model".into(), json!(req.model));
    body.insert("messages".into(), Value::Array(messages));
    if !req.tools.is_empty() {
        let tools: Vec<Value> = req
            .tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameters,
                    }
                })
            })
            .collect();
        body.insert("tools".into(), Value::Array(tools));
    }
    body.insert("temperature".into(), json!(req.temperature));
    body.insert("max_tokens".into(), json!(req.max_output_tokens));
    Value::Object(body)
}

fn encode_message(m: &Message) -> Value {
    let mut o = Map::new();
    o.insert("role".into(), json!(m.role.wire_name()));
    o.insert("content".into(), json!(m.content));
    if !m.tool_calls.is_empty() {
        let calls: Vec<Value> = m
            .tool_calls
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "type": "function",
                    "function": {"name": c.name, "arguments": c.arguments.to_string()},
                })
            })
            .collect();
        o.insert("tool_calls".into(), Value::Array(calls));
    }
    if let Some(id) = &m.tool_call_id {
        o.insert("tool_call_id".into(), json!(id));
    }
    Value::Object(o)
}

pub fn decode_response(body: &Value) -> Result<ChatResponse, BackendError> {
    let bad = |what: &str| BackendError::MalformedResponse(what.to_string());
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| bad("missing choices[0]"))?;
    let msg = choice.get("message").ok_or_else(|| bad("missing choices[0].message"))?;
    let content = match msg.get("content") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(bad("message.content is not a string")),
    };
    let mut tool_calls = Vec::new();
    if let Some(calls) = msg.get("tool_calls").filter(|v| !v.is_null()) {
        let calls = calls.as_array().ok_or_else(|| bad("tool_calls is not an array"))?;
        for (i, c) in calls.iter().enumerate() {
            let f = c.get("function").ok_or_else(|| bad("tool call without function"))?;
            let name = f
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("tool call without name"))?;
            let arguments = match f.get("arguments") {
                Some(Value::String(s)) if s.trim().is_empty() => json!({}),
                // unparseable arguments are passed on as a string so the
                // tool layer can report the schema error to the model
                Some(Value::String(s)) => serde_json::from_str(s).unwrap_or(Value::String(s.clone())),
                Some(v) => v.clone(),
                None => json!({}),
            };
            let id = c
                .get("id")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("call_{i}"));
            tool_calls.push(ToolCall {
                id,
                name: name.to_string(),
                arguments,
            });
        }
    }
    let usage = body.get("usage").ok_or_else(|| bad("missing usage"))?;
    let count = |k: &str| -> Result<u64, BackendError> {
        usage
            .get(k)
            .and_then(Value::as_u64)
            .ok_or_else(|| bad(&format!("usage.{k} missing or negative")))
    };
    let usage = Usage {
        input_tokens: count("prompt_tokens")?,
        output_tokens: count("completion_tokens")?,
    };
    let finish_kind = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishKind::Length,
        Some("tool_calls") => FinishKind::ToolCalls,
        _ if !tool_calls.is_empty() => FinishKind::ToolCalls,
        _ => FinishKind::Stop,
    };
    Ok(ChatResponse {
        message: Message {
            role: Role::Assistant,
            content,
            tool_calls,
            tool_call_id: None,
        },
        usage,
        finish_kind,
    })
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    let v = headers.get(reqwest::header::RETRY_AFTER)?.to_str().ok()?;
    v.trim().parse::<f64>().ok().filter(|s| *s >= 0.0).map(Duration::from_secs_f64)
}

#[async_trait]
impl ChatBackend for WireClient {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut rb = self.http.post(self.endpoint()).json(&encode_request(request));
        if let Some(k) = &self.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb.send().await.map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited {
                retry_after: retry_after(resp.headers()),
            });
        }
        let text = resp.text().await.map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            return Err(BackendError::HttpStatus(status.as_u16(), snippet));
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::MalformedResponse(format!("invalid JSON: {e}")))?;
        decode_response(&body)
    }

    fn describe(&self) -> String {
        format!("wire:{}", self.base)
    }
}
