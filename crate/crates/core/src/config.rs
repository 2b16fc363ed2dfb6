//! Run configuration and its validation.
//!
//! The on-disk format is TOML; callers hand [`validate_config`] the parsed
//! document as a JSON value so this crate stays format-agnostic.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::Severity;
use crate::money::Usd;

/// Model every default config can run without extra pricing entries.
pub const SCRIPTED_MODEL: &str = "scripted";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    /// Price of one million input tokens.
    pub input: Usd,
    /// Price of one million output tokens.
    pub output: Usd,
}

impl Pricing {
    pub fn cost(&self, input_tokens: u64, output_tokens: u64) -> Usd {
        Usd::for_tokens(input_tokens, self.input) + Usd::for_tokens(output_tokens, self.output)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxKind {
    Mock,
    Container,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxConfig {
    pub kind: SandboxKind,
    pub image: String,
    /// Engine endpoint: `unix:///var/run/docker.sock` or `http://host:port`.
    pub engine: String,
    #[serde(default)]
    pub network: Option<String>,
    pub exec_timeout_secs: u64,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            kind: SandboxKind::Mock,
            image: "explorer-tools:latest".into(),
            engine: "unix:///var/run/docker.sock".into(),
            network: None,
            exec_timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Wire,
    Playbook,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub playbook: Option<PathBuf>,
    pub seed: u64,
    /// Solve probability per agent for the stochastic backend.
    pub skill: f64,
    /// Overrides `EXPLORER_API_BASE` for the wire backend.
    #[serde(default)]
    pub api_base: Option<String>,
    pub request_timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Stochastic,
            playbook: None,
            seed: 0,
            skill: 0.3,
            api_base: None,
            request_timeout_secs: 120,
        }
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub parallel_subgraphs: u32,
    pub team_size: u32,
    pub base_budget: Usd,
    pub max_extensions: u32,
    pub reflection_thresholds: Vec<f64>,
    pub critic_after_failures: u32,
    pub dead_end_attempts: u32,
    pub dead_end_min_severity: Severity,
    pub model: String,
    pub pricing: BTreeMap<String, Pricing>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub max_concurrent_requests: u32,
    /// Optional per-entrypoint spend ceiling across the whole chain.
    pub entrypoint_budget: Option<Usd>,
    /// Optional per-agent turn cap; the budget is otherwise the only limit.
    #[serde(default)]
    pub max_rounds: Option<u32>,
    pub ground_truth: Option<PathBuf>,
    pub sandbox: SandboxConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub label: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut pricing = BTreeMap::new();
        pricing.insert(
            SCRIPTED_MODEL.to_string(),
            Pricing {
                input: Usd::from_micros(1_000_000),
                output: Usd::from_micros(1_000_000),
            },
        );
        RunConfig {
            parallel_subgraphs: 4,
            team_size: 7,
            base_budget: Usd::from_micros(300_000),
            max_extensions: 4,
            reflection_thresholds: vec![0.5, 0.8],
            critic_after_failures: 3,
            dead_end_attempts: 3,
            dead_end_min_severity: Severity::Medium,
            model: SCRIPTED_MODEL.into(),
            pricing,
            temperature: 0.0,
            max_output_tokens: 4096,
            max_concurrent_requests: 8,
            entrypoint_budget: None,
            max_rounds: None,
            ground_truth: None,
            sandbox: SandboxConfig::default(),
            backend: BackendConfig::default(),
            label: None,
        }
    }
}

impl RunConfig {
    pub fn pricing_for(&self, model: &str) -> Result<Pricing, ConfigError> {
        self.pricing
            .get(model)
            .copied()
            .ok_or_else(|| ConfigError::UnknownModel(model.to_string()))
    }

    /// Re-checks every invariant; used after programmatic edits.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.parallel_subgraphs < 1 {
            return Err(ConfigError::out_of_range("parallel_subgraphs", "must be >= 1"));
        }
        if self.team_size < 1 {
            return Err(ConfigError::out_of_range("team_size", "must be >= 1"));
        }
        if !self.base_budget.is_positive() {
            return Err(ConfigError::out_of_range("base_budget", "must be > 0"));
        }
        for t in &self.reflection_thresholds {
            if !(*t > 0.0 && *t < 1.0) {
                return Err(ConfigError::out_of_range(
                    "reflection_thresholds",
                    &format!("{t} is not in (0, 1)"),
                ));
            }
        }
        if self.reflection_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::NonMonotonicThresholds(self.reflection_thresholds.clone()));
        }
        if self.dead_end_attempts < 1 {
            return Err(ConfigError::out_of_range("dead_end_attempts", "must be >= 1"));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::out_of_range("temperature", "must be in [0, 2]"));
        }
        if self.max_concurrent_requests < 1 {
            return Err(ConfigError::out_of_range("max_concurrent_requests", "must be >= 1"));
        }
        if self.max_rounds == Some(0) {
            return Err(ConfigError::out_of_range("max_rounds", "must be >= 1"));
        }
        if let Some(b) = self.entrypoint_budget {
            if !b.is_positive() {
                return Err(ConfigError::out_of_range("entrypoint_budget", "must be > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.backend.skill) {
            return Err(ConfigError::out_of_range("backend.skill", "must be in [0, 1]"));
        }
        if self.backend.kind == BackendKind::Playbook && self.backend.playbook.is_none() {
            return Err(ConfigError::MissingKey("backend.playbook".into()));
        }
        self.pricing_for(&self.model)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
    #[error("reflection_thresholds must be strictly increasing, got {0:?}")]
    NonMonotonicThresholds(Vec<f64>),
    #[error("no pricing entry for model `{0}`")]
    UnknownModel(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` has the wrong type: {reason}")]
    Type { key: String, reason: String },
}

impl ConfigError {
    fn out_of_range(key: &str, reason: &str) -> Self {
        ConfigError::OutOfRange {
            key: key.into(),
            reason: reason.into(),
        }
    }

    fn ty(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Type {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "parallel_subgraphs",
    "team_size",
    "base_budget",
    "max_extensions",
    "reflection_thresholds",
    "critic_after_failures",
    "dead_end_attempts",
    "dead_end_min_severity",
    "model",
    "pricing",
    "temperature",
    "max_output_tokens",
    "max_concurrent_requests",
    "entrypoint_budget",
    "max_rounds",
    "ground_truth",
    "sandbox",
    "backend",
    "label",
    // consumed by the cli, tolerated here
    "targets",
];

/// Builds a [`RunConfig`] from a parsed config document. Unset keys take
/// their defaults.
pub fn validate_config(raw: &Value) -> Result<RunConfig, ConfigError> {
    let obj = match raw {
        Value::Object(m) => m,
        Value::Null => return finish(RunConfig::default()),
        _ => return Err(ConfigError::ty("<root>", "expected a table")),
    };
    for k in obj.keys() {
        if !TOP_KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
    }
    let mut c = RunConfig::default();
    if let Some(v) = obj.get("parallel_subgraphs") {
        c.parallel_subgraphs = uint(v, "parallel_subgraphs")?;
    }
    if let Some(v) = obj.get("team_size") {
        c.team_size = uint(v, "team_size")?;
    }
    if let Some(v) = obj.get("base_budget") {
        c.base_budget = money(v, "base_budget")?;
    }
    if let Some(v) = obj.get("max_extensions") {
        c.max_extensions = uint(v, "max_extensions")?;
    }
    if let Some(v) = obj.get("reflection_thresholds") {
        let arr = v
            .as_array()
            .ok_or_else(|| ConfigError::ty("reflection_thresholds", "expected an array"))?;
        c.reflection_thresholds = arr
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| ConfigError::ty("reflection_thresholds", "expected numbers"))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = obj.get("critic_after_failures") {
        c.critic_after_failures = uint(v, "critic_after_failures")?;
    }
    if let Some(v) = obj.get("dead_end_attempts") {
        c.dead_end_attempts = uint(v, "dead_end_attempts")?;
    }
    if let Some(v) = obj.get("dead_end_min_severity") {
        let s = text(v, "dead_end_min_severity")?;
        c.dead_end_min_severity = Severity::parse_label(&s).ok_or_else(|| {
            ConfigError::out_of_range("dead_end_min_severity", &format!("unknown severity {s:?}"))
        })?;
    }
    if let Some(v) = obj.get("model") {
        c.model = text(v, "model")?;
    }
    if let Some(v) = obj.get("pricing") {
        let table = v
            .as_object()
            .ok_or_else(|| ConfigError::ty("pricing", "expected a table of models"))?;
        for (model, entry) in table {
            let key = format!("pricing.{model}");
            let e = entry
                .as_object()
                .ok_or_else(|| ConfigError::ty(&key, "expected {input, output}"))?;
            let input = e
                .get("input")
                .ok_or_else(|| ConfigError::MissingKey(format!("{key}.input")))?;
            let output = e
                .get("output")
                .ok_or_else(|| ConfigError::MissingKey(format!("{key}.output")))?;
            let p = Pricing {
                input: money(input, &format!("{key}.input"))?,
                output: money(output, &format!("{key}.output"))?,
            };
            if p.input.micros() < 0 || p.output.micros() < 0 {
                return Err(ConfigError::out_of_range(&key, "prices must be >= 0"));
            }
            c.pricing.insert(model.clone(), p);
        }
    }
    if let Some(v) = obj.get("temperature") {
        c.temperature = v
            .as_f64()
            .ok_or_else(|| ConfigError::ty("temperature", "expected a number"))?;
    }
    if let Some(v) = obj.get("max_output_tokens") {
        c.max_output_tokens = uint(v, "max_output_tokens")?;
    }
    if let Some(v) = obj.get("max_concurrent_requests") {
        c.max_concurrent_requests = uint(v, "max_concurrent_requests")?;
    }
    if let Some(v) = obj.get("entrypoint_budget") {
        c.entrypoint_budget = Some(money(v, "entrypoint_budget")?);
    }
    if let Some(v) = obj.get("max_rounds") {
        c.max_rounds = Some(uint(v, "max_rounds")?);
    }
    if let Some(v) = obj.get("ground_truth") {
        c.ground_truth = Some(PathBuf::from(text(v, "ground_truth")?));
    }
    if let Some(v) = obj.get("label") {
        c.label = Some(text(v, "label")?);
    }
    if let Some(v) = obj.get("sandbox") {
        c.sandbox = sandbox(v)?;
    }
    if let Some(v) = obj.get("backend") {
        c.backend = backend(v)?;
    }
    finish(c)
}

fn finish(c: RunConfig) -> Result<RunConfig, ConfigError> {
    c.check()?;
    Ok(c)
}

fn sandbox(v: &Value) -> Result<SandboxConfig, ConfigError> {
    let o = v
        .as_object()
        .ok_or_else(|| ConfigError::ty("sandbox", "expected a table"))?;
    let mut s = SandboxConfig::default();
    for (k, v) in o {
        let key = format!("sandbox.{k}");
        match k.as_str() {
            "kind" => {
                s.kind = match text(v, &key)?.as_str() {
                    "mock" => SandboxKind::Mock,
                    "container" => SandboxKind::Container,
                    other => {
                        return Err(ConfigError::out_of_range(&key, &format!("unknown kind {other:?}")))
                    }
                }
            }
            "image" => s.image = text(v, &key)?,
            "engine" => s.engine = text(v, &key)?,
            "network" => s.network = Some(text(v, &key)?),
            "exec_timeout_secs" => {
                s.exec_timeout_secs = uint::<u64>(v, &key)?;
                if s.exec_timeout_secs == 0 {
                    return Err(ConfigError::out_of_range(&key, "must be > 0"));
                }
            }
            _ => return Err(ConfigError::UnknownKey(key)),
        }
    }
    Ok(s)
}

fn backend(v: &Value) -> Result<BackendConfig, ConfigError> {
    let o = v
        .as_object()
        .ok_or_else(|| ConfigError::ty("backend", "expected a table"))?;
    let mut b = BackendConfig::default();
    for (k, v) in o {
        let key = format!("backend.{k}");
        match k.as_str() {
            "kind" => {
                b.kind = match text(v, &key)?.as_str() {
                    "wire" => BackendKind::Wire,
                    "playbook" => BackendKind::Playbook,
                    "stochastic" => BackendKind::Stochastic,
                    other => {
                        return Err(ConfigError::out_of_range(&key, &format!("unknown kind {other:?}")))
                    }
                }
            }
            "playbook" => b.playbook = Some(PathBuf::from(text(v, &key)?)),
            "seed" => b.seed = uint(v, &key)?,
            "skill" => {
                b.skill = v.as_f64().ok_or_else(|| ConfigError::ty(&key, "expected a number"))?
            }
            "api_base" => b.api_base = Some(text(v, &key)?),
            "request_timeout_secs" => b.request_timeout_secs = uint(v, &key)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
    }
    Ok(b)
}

fn uint<T: TryFrom<u64>>(v: &Value, key: &str) -> Result<T, ConfigError> {
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                T::try_from(u).map_err(|_| ConfigError::out_of_range(key, "too large"))
            } else {
                Err(ConfigError::out_of_range(key, &format!("{n} is not a non-negative integer")))
            }
        }
        _ => Err(ConfigError::ty(key, "expected an integer")),
    }
}

fn money(v: &Value, key: &str) -> Result<Usd, ConfigError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .map(Usd::from_f64)
            .ok_or_else(|| ConfigError::ty(key, "expected a number")),
        Value::String(s) => s
            .parse()
            .map_err(|_| ConfigError::ty(key, format!("{s:?} is not an amount"))),
        _ => Err(ConfigError::ty(key, "expected an amount")),
    }
}

fn text(v: &Value, key: &str) -> Result<String, ConfigError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| ConfigError::ty(key, "expected a string"))
}
