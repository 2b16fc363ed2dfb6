//! The five agent tools: schemas for the wire and argument validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::gateway::{ToolCall, ToolSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    ShellExec,
    HttpRequest,
    WriteFile,
    SubmitFlag,
    Finish,
}

impl ToolName {
    pub const ALL: [ToolName; 5] = [
        ToolName::ShellExec,
        ToolName::HttpRequest,
        ToolName::WriteFile,
        ToolName::SubmitFlag,
        ToolName::Finish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::ShellExec => "shell_exec",
            ToolName::HttpRequest => "http_request",
            ToolName::WriteFile => "write_file",
            ToolName::SubmitFlag => "submit_flag",
            ToolName::Finish => "finish",
        }
    }

    pub fn parse(name: &str) -> Option<ToolName> {
        ToolName::ALL.into_iter().find(|t| t.as_str() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellExecArgs {
    pub command: String,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpRequestArgs {
    pub url: String,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub body: Option<String>,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
}

impl HttpRequestArgs {
    /// Equivalent curl invocation, run inside the sandbox.
    pub fn to_curl(&self) -> String {
        let method = self.method.as_deref().unwrap_or("GET").to_ascii_uppercase();
        let mut argv: Vec<String> = vec![
            "curl".into(),
            "-s".into(),
            "-i".into(),
            "-X".into(),
            method,
            "--max-time".into(),
            "10".into(),
        ];
        for (k, v) in &self.headers {
            argv.push("-H".into());
            argv.push(format!("{k}: {v}"));
        }
        if let Some(b) = &self.body {
            argv.push("--data-raw".into());
            argv.push(b.clone());
        }
        argv.push(self.url.clone());
        shell_words::join(argv)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteFileArgs {
    pub path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitFlagArgs {
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinishArgs {
    #[serde(default)]
    pub summary: Option<String>,
    /// True hands the entrypoint to the next agent; false gives up.
    #[serde(default)]
    pub handoff: bool,
    #[serde(default)]
    pub failed_approaches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToolInvocation {
    ShellExec(ShellExecArgs),
    HttpRequest(HttpRequestArgs),
    WriteFile(WriteFileArgs),
    SubmitFlag(SubmitFlagArgs),
    Finish(FinishArgs),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("invalid arguments for {tool}: {reason}")]
    BadArguments { tool: &'static str, reason: String },
}

/// Validates a model-issued call against its tool schema.
pub fn parse_call(call: &ToolCall) -> Result<ToolInvocation, ToolError> {
    let name = ToolName::parse(&call.name).ok_or_else(|| ToolError::UnknownTool(call.name.clone()))?;
    let args = match &call.arguments {
        Value::Null => json!({}),
        v => v.clone(),
    };
    let bad = |e: serde_json::Error| ToolError::BadArguments {
        tool: name.as_str(),
        reason: e.to_string(),
    };
    let inv = match name {
        ToolName::ShellExec => ToolInvocation::ShellExec(serde_json::from_value(args).map_err(bad)?),
        ToolName::HttpRequest => {
            let a: HttpRequestArgs = serde_json::from_value(args).map_err(bad)?;
            if url::Url::parse(&a.url).is_err() {
                return Err(ToolError::BadArguments {
                    tool: name.as_str(),
                    reason: format!("url {:?} is not absolute", a.url),
                });
            }
            ToolInvocation::HttpRequest(a)
        }
        ToolName::WriteFile => ToolInvocation::WriteFile(serde_json::from_value(args).map_err(bad)?),
        ToolName::SubmitFlag => ToolInvocation::SubmitFlag(serde_json::from_value(args).map_err(bad)?),
        ToolName::Finish => ToolInvocation::Finish(serde_json::from_value(args).map_err(bad)?),
    };
    if let ToolInvocation::ShellExec(a) = &inv {
        if a.command.trim().is_empty() {
            return Err(ToolError::BadArguments {
                tool: name.as_str(),
                reason: "command is empty".into(),
            });
        }
    }
    Ok(inv)
}

pub fn schemas() -> Vec<ToolSchema> {
    vec![
        ToolSchema {
            name: "shell_exec".into(),
            description: "Run a shell command inside your sandbox.".into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "command": {"type": "string"},
                    "timeout_secs": {"type": "integer", "minimum": 1}
                },
                "required": ["command"],
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: "http_request".into(),
            description: "Send an HTTP request from your sandbox and return the raw response.".into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "url": {"type": "string"},
                    "method": {"type": "string"},
                    "body": {"type": "string"},
                    "headers": {"type": "object", "additionalProperties": {"type": "string"}}
                },
                "required": ["url"],
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: "write_file".into(),
            description: "Save an evidence file to your workspace (relative path).".into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "path": {"type": "string"},
                    "content": {"type": "string"}
                },
                "required": ["path", "content"],
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: "submit_flag".into(),
            description: "Submit a captured flag for this target.".into(),
            parameters: json!({
                "type": "object",
                "properties": {"flag": {"type": "string"}},
                "required": ["flag"],
                "additionalProperties": false
            }),
        },
        ToolSchema {
            name: "finish".into(),
            description: "End your session. Set handoff=true to pass the target to the next agent.".into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "summary": {"type": "string"},
                    "handoff": {"type": "boolean"},
                    "failed_approaches": {"type": "array", "items": {"type": "string"}}
                },
                "additionalProperties": false
            }),
        },
    ]
}
