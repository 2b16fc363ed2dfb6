//! Shared vocabulary: entrypoints, findings, agent records, flags, and chain
//! outcomes.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use crate::money::Usd;

pub const MAX_BANNER_CHARS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    Http,
    Ftp,
    Ssh,
    TcpUnknown,
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceKind::Http => "http",
            ServiceKind::Ftp => "ftp",
            ServiceKind::Ssh => "ssh",
            ServiceKind::TcpUnknown => "tcp_unknown",
        })
    }
}

/// A reachable `host:port` with fingerprinted service metadata.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntryPoint {
    pub host: String,
    pub port: u16,
    pub service_kind: ServiceKind,
    #[serde(default)]
    pub banner: Option<String>,
}

impl EntryPoint {
    pub fn new(host: impl Into<String>, port: u16, service_kind: ServiceKind) -> Self {
        EntryPoint {
            host: host.into(),
            port,
            service_kind,
            banner: None,
        }
    }

    pub fn with_banner(mut self, banner: impl Into<String>) -> Self {
        let banner: String = banner.into();
        self.banner = Some(truncate_chars(&banner, MAX_BANNER_CHARS));
        self
    }

    /// `host:port`, the identity of a challenge.
    pub fn key(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }

    /// Filesystem-safe form of the key, used for agent ids and workspace dirs.
    pub fn slug(&self) -> String {
        self.key()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.port == 0 {
            return Err(format!("port 0 is not a valid entrypoint port ({})", self.host));
        }
        if self.host.trim().is_empty() {
            return Err("entrypoint host is empty".into());
        }
        Ok(())
    }
}

impl fmt::Display for EntryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} ({})", self.host, self.port, self.service_kind)
    }
}

/// Checks that `(host, port)` pairs are unique and ports valid.
pub fn validate_queue(queue: &[EntryPoint]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for ep in queue {
        ep.validate()?;
        if !seen.insert((ep.host.as_str(), ep.port)) {
            return Err(format!("duplicate entrypoint {}", ep.key()));
        }
    }
    Ok(())
}

pub(crate) fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((idx, _)) => s[..idx].to_string(),
        None => s.to_string(),
    }
}

/// Finding severity. `Ord` follows Critical > High > Medium > Low > Info.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    /// Highest first, as tables print them.
    pub const ALL: [Severity; 5] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Info,
    ];

    /// Case-insensitive label lookup; accepts the common `Med` abbreviation.
    pub fn parse_label(label: &str) -> Option<Severity> {
        match label.trim().to_ascii_lowercase().as_str() {
            "critical" => Some(Severity::Critical),
            "high" => Some(Severity::High),
            "medium" | "med" => Some(Severity::Medium),
            "low" => Some(Severity::Low),
            "info" | "informational" => Some(Severity::Info),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "Critical",
            Severity::High => "High",
            Severity::Medium => "Medium",
            Severity::Low => "Low",
            Severity::Info => "Info",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Severity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Severity::parse_label(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown severity {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub finding_id: String,
    pub agent_id: String,
    pub entrypoint: EntryPoint,
    pub title: String,
    pub description: String,
    pub severity: Severity,
    pub confidence: f64,
    #[serde(default)]
    pub evidence_refs: Vec<String>,
    #[serde(default)]
    pub endpoints: Vec<String>,
    #[serde(default)]
    pub credentials: Option<Vec<String>>,
}

impl Finding {
    /// True when every evidence ref is a relative path below `agent_dir`
    /// (itself relative to the run workspace) without `..` components.
    pub fn evidence_within(&self, agent_dir: &str) -> bool {
        self.evidence_refs
            .iter()
            .all(|r| evidence_ref_within(r, agent_dir))
    }
}

pub fn evidence_ref_within(reference: &str, agent_dir: &str) -> bool {
    let p = Path::new(reference);
    if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return false;
    }
    p.starts_with(agent_dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExitReason {
    Solved,
    HandOff,
    GiveUp,
    BudgetExhausted,
    Error,
}

impl ExitReason {
    pub const ALL: [ExitReason; 5] = [
        ExitReason::Solved,
        ExitReason::HandOff,
        ExitReason::GiveUp,
        ExitReason::BudgetExhausted,
        ExitReason::Error,
    ];
}

/// Lifecycle record of one short-lived agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: String,
    pub team_index: u32,
    pub entrypoint: EntryPoint,
    pub rounds: u32,
    pub cost: Usd,
    pub extensions_granted: u32,
    pub exit_reason: ExitReason,
    #[serde(default)]
    pub failed_approaches: Vec<String>,
    #[serde(default)]
    pub findings: Vec<Finding>,
    #[serde(default)]
    pub reflection_notes: Vec<String>,
    #[serde(default)]
    pub critic_notes: Vec<String>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagSubmission {
    pub agent_id: String,
    pub entrypoint: EntryPoint,
    pub value: String,
    pub correct: bool,
    pub wall_clock: DateTime<Utc>,
    pub round_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Solved,
    DeadEnd,
    MaxAgentsReached,
    BudgetExhausted,
}

impl Outcome {
    pub fn is_solved(self) -> bool {
        matches!(self, Outcome::Solved)
    }
}

/// Terminal outcome of one entrypoint's agent chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphResult {
    pub entrypoint: EntryPoint,
    pub outcome: Outcome,
    pub agents: Vec<AgentRecord>,
    pub total_rounds: u64,
    pub total_cost: Usd,
    pub flag_submissions: Vec<FlagSubmission>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SubgraphResult {
    /// Builds a result with the accounting totals derived from `agents`.
    pub fn new(
        entrypoint: EntryPoint,
        outcome: Outcome,
        agents: Vec<AgentRecord>,
        flag_submissions: Vec<FlagSubmission>,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    ) -> Self {
        let total_rounds = agents.iter().map(|a| u64::from(a.rounds)).sum();
        let total_cost = agents.iter().map(|a| a.cost).sum();
        SubgraphResult {
            entrypoint,
            outcome,
            agents,
            total_rounds,
            total_cost,
            flag_submissions,
            start,
            end,
            notes: Vec::new(),
        }
    }

    pub fn check_invariants(&self, team_size: u32) -> Result<(), String> {
        let rounds: u64 = self.agents.iter().map(|a| u64::from(a.rounds)).sum();
        if rounds != self.total_rounds {
            return Err(format!("total_rounds {} != sum {}", self.total_rounds, rounds));
        }
        let cost: Usd = self.agents.iter().map(|a| a.cost).sum();
        if cost != self.total_cost {
            return Err(format!("total_cost {} != sum {}", self.total_cost, cost));
        }
        if self.agents.len() > team_size as usize {
            return Err(format!("{} agents exceed team size {}", self.agents.len(), team_size));
        }
        let any_correct = self.flag_submissions.iter().any(|s| s.correct);
        if any_correct != self.outcome.is_solved() {
            return Err(format!(
                "outcome {:?} inconsistent with correct submission present = {any_correct}",
                self.outcome
            ));
        }
        for a in &self.agents {
            if a.exit_reason == ExitReason::Solved
                && !self
                    .flag_submissions
                    .iter()
                    .any(|s| s.correct && s.agent_id == a.agent_id)
            {
                return Err(format!("agent {} solved without a correct submission", a.agent_id));
            }
        }
        Ok(())
    }
}

/// Best-hypothesis task directive produced by the supervisor at hand-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub hypothesis: String,
    #[serde(default)]
    pub rationale: String,
    pub confidence: f64,
    #[serde(default)]
    pub suggested_techniques: Vec<String>,
    /// Set when the directive was produced without a usable signal.
    #[serde(default)]
    pub exploratory: bool,
}

impl Directive {
    pub const FALLBACK_HYPOTHESIS: &'static str = "continue prior approach";

    pub fn fallback() -> Self {
        Directive {
            hypothesis: Self::FALLBACK_HYPOTHESIS.into(),
            rationale: String::new(),
            confidence: 0.0,
            suggested_techniques: Vec::new(),
            exploratory: true,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.hypothesis.trim().is_empty() {
            return Err("directive hypothesis is empty".into());
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("directive confidence {} outside [0,1]", self.confidence));
        }
        Ok(())
    }
}

/// Decision-node verdict for an agent at its budget cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fate {
    Extend,
    HandOff,
    GiveUp,
}

/// Which role issued a model call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caller {
    Agent,
    Supervisor,
    Critic,
    Decision,
    Extractor,
}

impl Caller {
    pub fn as_str(self) -> &'static str {
        match self {
            Caller::Agent => "agent",
            Caller::Supervisor => "supervisor",
            Caller::Critic => "critic",
            Caller::Decision => "decision",
            Caller::Extractor => "extractor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub host: String,
    pub port: u16,
    pub flag: String,
    pub challenge_name: String,
}

/// Ground-truth manifest: exactly one flag per entrypoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub entries: Vec<GroundTruthEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing ground-truth manifest: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("entrypoint {0} has more than one flag")]
    Duplicate(String),
}

impl GroundTruth {
    pub fn new(entries: Vec<GroundTruthEntry>) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert((e.host.clone(), e.port)) {
                return Err(ManifestError::Duplicate(format!("{}:{}", e.host, e.port)));
            }
        }
        Ok(GroundTruth { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        let entries: Vec<GroundTruthEntry> = serde_json::from_str(text)?;
        GroundTruth::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        GroundTruth::from_json(&text)
    }

    pub fn flag_for(&self, host: &str, port: u16) -> Option<&GroundTruthEntry> {
        self.entries.iter().find(|e| e.host == host && e.port == port)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entrypoint key to challenge name.
    pub fn challenge_map(&self) -> std::collections::BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|e| (format!("{}:{}", e.host, e.port), e.challenge_name.clone()))
            .collect()
    }

    /// Distinct challenges; several entrypoints may belong to one.
    pub fn challenge_count(&self) -> usize {
        self.entries.iter().map(|e| &e.challenge_name).collect::<BTreeSet<_>>().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// True iff the whitespace-trimmed `value` equals the manifest flag for
/// `entrypoint`. Comparison is byte-exact (case-sensitive).
pub fn check_flag(value: &str, entrypoint: &EntryPoint, manifest: &GroundTruth) -> bool {
    let value = value.trim();
    if value.is_empty() {
        return false;
    }
    manifest
        .flag_for(&entrypoint.host, entrypoint.port)
        .is_some_and(|e| e.flag.trim() == value)
}
