//! Scripted backend driven by an ordered decision table.
//!
//! File format (JSON):
//!
//! ```json
//! {
//!   "name": "example",
//!   "rows": [
//!     {"when": {"caller": "agent", "agent": 0, "round": 0},
//!      "reply": {"content": "probe", "tool_calls": [{"name": "http_request",
//!                "arguments": {"url": "http://{{target}}/"}}],
//!                "usage": {"input": 900, "output": 100}}}
//!   ],
//!   "defaults": {"critic": {"content": "keep going"}},
//!   "default": "finish"
//! }
//! ```
//!
//! `when` keys: `caller`, `agent` (team index), `round`, `extensions`,
//! `last_contains`, `last_regex`, `conversation_contains`,
//! `conversation_regex`. All given keys must hold. Replies may reference
//! `$1`..`$9` (captures of the row's regex, conversation regex preferred),
//! `{{target}}`, `{{host}}`, `{{port}}`, `{{agent}}` and `{{round}}`.
//! A row with no match falls through to `defaults[caller]`, then `default`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Deserializer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{
    BackendError, ChatBackend, ChatRequest, ChatResponse, FinishKind, Message, Role, ToolCall,
    Usage,
};
use crate::domain::Caller;
use crate::tools::ToolName;

#[derive(Clone)]
pub struct Pattern(Regex);

impl Pattern {
    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}/", self.0.as_str())
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.0.as_str() == other.0.as_str()
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Regex::new(&s)
            .map(Pattern)
            .map_err(|e| serde::de::Error::custom(format!("invalid regex {s:?}: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conditions {
    pub caller: Option<Caller>,
    pub agent: Option<u32>,
    pub round: Option<u32>,
    pub extensions: Option<u32>,
    pub last_contains: Option<String>,
    pub last_regex: Option<Pattern>,
    pub conversation_contains: Option<String>,
    pub conversation_regex: Option<Pattern>,
}

impl Conditions {
    /// True when every condition set here is also set, identically, in
    /// `other`; `self` then matches whenever `other` does.
    fn subsumes(&self, other: &Conditions) -> bool {
        fn sub<T: PartialEq>(a: &Option<T>, b: &Option<T>) -> bool {
            match a {
                None => true,
                Some(x) => b.as_ref() == Some(x),
            }
        }
        sub(&self.caller, &other.caller)
            && sub(&self.agent, &other.agent)
            && sub(&self.round, &other.round)
            && sub(&self.extensions, &other.extensions)
            && sub(&self.last_contains, &other.last_contains)
            && sub(&self.last_regex, &other.last_regex)
            && sub(&self.conversation_contains, &other.conversation_contains)
            && sub(&self.conversation_regex, &other.conversation_regex)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedCall {
    pub name: ToolName,
    #[serde(default = "empty_object")]
    pub arguments: Value,
}

fn empty_object() -> Value {
    json!({})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedUsage {
    #[serde(default)]
    pub input: u64,
    #[serde(default)]
    pub output: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reply {
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub tool_calls: Vec<ScriptedCall>,
    #[serde(default)]
    pub usage: ScriptedUsage,
}

impl Reply {
    /// Plain stop with no tool calls.
    pub fn finish() -> Self {
        Reply {
            content: "finish".into(),
            tool_calls: Vec::new(),
            usage: ScriptedUsage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultReply(pub Reply);

impl<'de> Deserialize<'de> for DefaultReply {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Full(Reply),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "finish" => Ok(DefaultReply(Reply::finish())),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "unknown default shorthand {w:?} (only \"finish\")"
            ))),
            Raw::Full(r) => Ok(DefaultReply(r)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    #[serde(default)]
    pub when: Conditions,
    pub reply: Reply,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaybookFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    rows: Vec<Row>,
    #[serde(default)]
    defaults: BTreeMap<Caller, DefaultReply>,
    #[serde(default)]
    default: Option<DefaultReply>,
}

#[derive(Debug, Clone)]
pub struct Playbook {
    pub name: String,
    pub rows: Vec<Row>,
    pub defaults: BTreeMap<Caller, Reply>,
    pub default: Reply,
    /// Rows that can never fire because an earlier row always wins.
    pub warnings: Vec<String>,
    source: Option<PathBuf>,
    digest: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PlaybookError {
    #[error("reading playbook {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("playbook parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub fn load_playbook(path: &Path) -> Result<Playbook, PlaybookError> {
    let text = std::fs::read_to_string(path).map_err(|source| PlaybookError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pb = Playbook::parse(&text)?;
    pb.source = Some(path.to_path_buf());
    if pb.name.is_empty() {
        pb.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(pb)
}

impl Playbook {
    pub fn parse(text: &str) -> Result<Self, PlaybookError> {
        let file: PlaybookFile = serde_json::from_str(text).map_err(|e| PlaybookError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut warnings = Vec::new();
        for (i, row) in file.rows.iter().enumerate() {
            if let Some(j) = file.rows[..i].iter().position(|r| r.when.subsumes(&row.when)) {
                warnings.push(format!("row {i} is unreachable: row {j} always matches first"));
            }
        }
        for w in &warnings {
            tracing::warn!("{w}");
        }
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Playbook {
            name: file.name.unwrap_or_default(),
            rows: file.rows,
            defaults: file.defaults.into_iter().map(|(k, v)| (k, v.0)).collect(),
            default: file.default.map(|d| d.0).unwrap_or_else(Reply::finish),
            warnings,
            source: None,
            digest,
        })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Index of the row that fires for `req` (None = a default) and the
    /// regex captures it produced.
    pub fn select(&self, req: &ChatRequest) -> (Option<usize>, Vec<String>) {
        let conversation = render_conversation(&req.messages);
        let last = req.last_content();
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(caps) = matches(&row.when, req, last, &conversation) {
                return (Some(i), caps);
            }
        }
        (None, Vec::new())
    }

    pub fn respond(&self, req: &ChatRequest) -> ChatResponse {
        let (row, caps) = self.select(req);
        let reply = match row {
            Some(i) => &self.rows[i].reply,
            None => self
                .defaults
                .get(&req.context.caller)
                .unwrap_or(&self.default),
        };
        let vars = Vars::new(req, caps);
        let tool_calls: Vec<ToolCall> = reply
            .tool_calls
            .iter()
            .enumerate()
            .map(|(i, c)| ToolCall {
                id: format!("call_{}_{}", req.context.round.unwrap_or(0), i),
                name: c.name.as_str().to_string(),
                arguments: vars.apply_value(&c.arguments),
            })
            .collect();
        let finish_kind = if tool_calls.is_empty() {
            FinishKind::Stop
        } else {
            FinishKind::ToolCalls
        };
        ChatResponse {
            message: Message {
                role: Role::Assistant,
                content: vars.apply(&reply.content),
                tool_calls,
                tool_call_id: None,
            },
            usage: Usage {
                input_tokens: reply.usage.input,
                output_tokens: reply.usage.output,
            },
            finish_kind,
        }
    }
}

fn render_conversation(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(&m.content);
        out.push('\n');
    }
    out
}

fn matches(c: &Conditions, req: &ChatRequest, last: &str, conversation: &str) -> Option<Vec<String>> {
    let ctx = &req.context;
    if c.caller.is_some_and(|x| x != ctx.caller) {
        return None;
    }
    if c.agent.is_some() && c.agent != ctx.agent_index {
        return None;
    }
    if c.round.is_some() && c.round != ctx.round {
        return None;
    }
    if c.extensions.is_some_and(|x| x != ctx.extensions) {
        return None;
    }
    if c.last_contains.as_ref().is_some_and(|s| !last.contains(s.as_str())) {
        return None;
    }
    if c
        .conversation_contains
        .as_ref()
        .is_some_and(|s| !conversation.contains(s.as_str()))
    {
        return None;
    }
    let mut caps = Vec::new();
    if let Some(p) = &c.last_regex {
        let m = p.0.captures(last)?;
        caps = captures(&m);
    }
    if let Some(p) = &c.conversation_regex {
        // most recent occurrence wins
        let m = p.0.captures_iter(conversation).last()?;
        caps = captures(&m);
    }
    Some(caps)
}

fn captures(m: &regex::Captures<'_>) -> Vec<String> {
    m.iter()
        .map(|g| g.map(|g| g.as_str().to_string()).unwrap_or_default())
        .collect()
}

struct Vars {
    caps: Vec<String>,
    named: Vec<(&'static str, String)>,
}

impl Vars {
    fn new(req: &ChatRequest, caps: Vec<String>) -> Self {
        let ctx = &req.context;
        let (target, host, port) = match &ctx.entrypoint {
            Some(ep) => (ep.key(), ep.host.clone(), ep.port.to_string()),
            None => Default::default(),
        };
        Vars {
            caps,
            named: vec![
                ("{{target}}", target),
                ("{{host}}", host),
                ("{{port}}", port),
                ("{{agent}}", ctx.agent_index.map(|i| i.to_string()).unwrap_or_default()),
                ("{{round}}", ctx.round.map(|r| r.to_string()).unwrap_or_default()),
            ],
        }
    }

    fn apply(&self, s: &str) -> String {
        let mut out = s.to_string();
        for (k, v) in &self.named {
            if out.contains(k) {
                out = out.replace(k, v);
            }
        }
        // $9 down to $1 so "$1" never eats the prefix of "$10"-style text
        for i in (1..=9).rev() {
            let key = format!("${i}");
            if out.contains(&key) {
                let v = self.caps.get(i).map(String::as_str).unwrap_or("");
                out = out.replace(&key, v);
            }
        }
        out
    }

    fn apply_value(&self, v: &Value) -> Value {
        match v {
            Value::String(s) => Value::String(self.apply(s)),
            Value::Array(a) => Value::Array(a.iter().map(|x| self.apply_value(x)).collect()),
            Value::Object(o) => Value::Object(
                o.iter()
                    .map(|(k, x)| (k.clone(), self.apply_value(x)))
                    .collect(),
            ),
            other => other.clone(),
        }
    }
}

#[async_trait]
impl ChatBackend for Playbook {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        Ok(self.respond(request))
    }

    fn describe(&self) -> String {
        format!("playbook:{}", self.name)
    }

    fn replay_info(&self) -> Option<Value> {
        Some(json!({
            "kind": "playbook",
            "name": self.name,
            "path": self.source.as_ref().map(|p| p.display().to_string()),
            "sha256": self.digest,
        }))
    }
}
