//! Capability milestones checked against trace evidence.
//!
//! An oracle file lists groups (usually one per service) of ordered
//! milestones. Each milestone has an `aligned` predicate and an optional
//! weaker `partial` one. Predicates only look at event payloads, never at
//! chain outcomes.
//!
//! ```json
//! {"event": "ToolExec", "port": 80,
//!  "fields": {"command": {"regex": "\\?cmd="}, "exit_code": {"equals": 0}}}
//! {"all": [ ... ]}   {"any": [ ... ]}
//! ```

use std::path::Path;

use explorer_core::trace::{EventKind, TraceEvent};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneOracle {
    pub name: String,
    pub groups: Vec<MilestoneGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneGroup {
    pub name: String,
    #[serde(default)]
    pub port: Option<u16>,
    pub milestones: Vec<Milestone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub id: String,
    pub name: String,
    pub aligned: Predicate,
    #[serde(default)]
    pub partial: Option<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Predicate {
    All { all: Vec<Predicate> },
    Any { any: Vec<Predicate> },
    Event(EventMatch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventMatch {
    pub event: EventKind,
    /// Restricts to events of entrypoints on this port.
    #[serde(default)]
    pub port: Option<u16>,
    /// Dotted payload path to test.
    #[serde(default)]
    pub fields: std::collections::BTreeMap<String, FieldTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldTest {
    Equals(Value),
    Contains(String),
    Regex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Aligned,
    Partial,
    Missing,
}

impl Status {
    pub fn symbol(self) -> &'static str {
        match self {
            Status::Aligned => "✓",
            Status::Partial => "◐",
            Status::Missing => "✗",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PredicateError {
    #[error("predicate {predicate}: {reason}")]
    Invalid { predicate: String, reason: String },
    #[error("reading oracle {path}: {reason}")]
    Load { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MilestoneStatus {
    pub id: String,
    pub name: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStatus {
    pub name: String,
    pub port: Option<u16>,
    pub milestones: Vec<MilestoneStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MilestoneMatrix {
    pub oracle: String,
    pub groups: Vec<GroupStatus>,
}

impl MilestoneMatrix {
    /// One line, groups separated by `|`, e.g. `✓ ◐ ✗ ✗ | ✓ ✓ ◐ ◐`.
    pub fn symbols(&self) -> String {
        self.groups
            .iter()
            .map(|g| g.milestones.iter().map(|m| m.status.symbol()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Header and symbol row.
    pub fn render(&self) -> String {
        let head = self
            .groups
            .iter()
            .map(|g| g.milestones.iter().map(|m| m.id.as_str()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(" | ");
        format!("{head}\n{}", self.symbols())
    }
}

/// Payload fields per event kind; predicates may only name these.
fn known_fields(kind: EventKind) -> &'static [&'static str] {
    use EventKind::*;
    match kind {
        RunStarted => &["run_id", "model", "label", "settings", "total_challenges", "challenges", "entrypoints", "replay"],
        EntryPointDiscovered => &["entrypoint"],
        SubgraphStarted => &["entrypoint", "batch"],
        AgentSpawned => &["agent_id", "entrypoint", "team_index", "sandbox_id", "directive"],
        ModelCall => &[
            "caller", "agent_id", "entrypoint", "model", "round", "input_tokens", "output_tokens", "cost", "attempts",
            "finish_kind", "message_digests",
        ],
        ToolExec => &["agent_id", "entrypoint", "round", "tool", "command", "exit_code", "output", "truncated", "duration_ms"],
        Reflection => &["agent_id", "entrypoint", "threshold", "spent", "cap", "epoch"],
        BudgetExtended => &["agent_id", "entrypoint", "extensions", "new_cap", "spent"],
        CriticInterjection => &["agent_id", "entrypoint", "threshold", "consecutive_failures", "message", "after_solve"],
        SupervisorDirective => &["entrypoint", "next_agent_index", "directive", "fallback"],
        FlagSubmitted => &["agent_id", "entrypoint", "value", "correct", "round"],
        FindingRecorded => &["finding"],
        EvidenceWritten => &["agent_id", "entrypoint", "path", "bytes"],
        AgentExited => &["agent_id", "entrypoint", "team_index", "exit_reason", "rounds", "cost", "extensions", "fate", "error"],
        SubgraphEnded => &["entrypoint", "outcome", "agents", "total_rounds", "total_cost"],
        RunEnded => &["subgraphs", "solved"],
    }
}

enum Test {
    Equals(Value),
    Contains(String),
    Regex(Regex),
}

struct Matcher {
    event: EventKind,
    port: Option<u16>,
    fields: Vec<(Vec<String>, Test)>,
}

enum Compiled {
    All(Vec<Compiled>),
    Any(Vec<Compiled>),
    Event(Matcher),
}

fn compile(p: &Predicate, name: &str) -> Result<Compiled, PredicateError> {
    let invalid = |reason: String| PredicateError::Invalid {
        predicate: name.to_string(),
        reason,
    };
    Ok(match p {
        Predicate::All { all } if all.is_empty() => return Err(invalid("empty `all`".into())),
        Predicate::Any { any } if any.is_empty() => return Err(invalid("empty `any`".into())),
        Predicate::All { all } => Compiled::All(all.iter().map(|q| compile(q, name)).collect::<Result<_, _>>()?),
        Predicate::Any { any } => Compiled::Any(any.iter().map(|q| compile(q, name)).collect::<Result<_, _>>()?),
        Predicate::Event(m) => {
            let mut fields = Vec::new();
            for (path, test) in &m.fields {
                let segs: Vec<String> = path.split('.').map(str::to_string).collect();
                if !known_fields(m.event).contains(&segs[0].as_str()) {
                    return Err(invalid(format!("{:?} has no field `{}`", m.event, segs[0])));
                }
                let t = match test {
                    FieldTest::Equals(v) => Test::Equals(v.clone()),
                    FieldTest::Contains(s) => Test::Contains(s.clone()),
                    FieldTest::Regex(r) => {
                        Test::Regex(Regex::new(r).map_err(|e| invalid(format!("field `{path}`: {e}")))?)
                    }
                };
                fields.push((segs, t));
            }
            Compiled::Event(Matcher {
                event: m.event,
                port: m.port,
                fields,
            })
        }
    })
}

struct Ev {
    kind: EventKind,
    port: Option<u16>,
    payload: Value,
}

fn lookup<'a>(v: &'a Value, path: &[String]) -> Option<&'a Value> {
    path.iter().try_fold(v, |v, seg| v.get(seg))
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Compiled {
    fn holds(&self, events: &[Ev]) -> bool {
        match self {
            Compiled::All(ps) => ps.iter().all(|p| p.holds(events)),
            Compiled::Any(ps) => ps.iter().any(|p| p.holds(events)),
            Compiled::Event(m) => events.iter().any(|e| {
                e.kind == m.event
                    && m.port.is_none_or(|p| e.port == Some(p))
                    && m.fields.iter().all(|(path, t)| {
                        lookup(&e.payload, path).is_some_and(|v| match t {
                            Test::Equals(x) => v == x,
                            Test::Contains(s) => text(v).contains(s.as_str()),
                            Test::Regex(r) => r.is_match(&text(v)),
                        })
                    })
            }),
        }
    }
}

impl MilestoneOracle {
    pub fn from_json(text: &str) -> Result<Self, PredicateError> {
        let o: MilestoneOracle = serde_json::from_str(text).map_err(|e| PredicateError::Load {
            path: "<inline>".into(),
            reason: e.to_string(),
        })?;
        o.check()?;
        Ok(o)
    }

    pub fn load(path: &Path) -> Result<Self, PredicateError> {
        let err = |reason: String| PredicateError::Load {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let o: MilestoneOracle = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        o.check()?;
        Ok(o)
    }

    /// Compiles every predicate once, reporting the first bad one.
    pub fn check(&self) -> Result<(), PredicateError> {
        self.compiled().map(|_| ())
    }

    fn compiled(&self) -> Result<Vec<Vec<(Compiled, Option<Compiled>)>>, PredicateError> {
        self.groups
            .iter()
            .map(|g| {
                g.milestones
                    .iter()
                    .map(|m| {
                        let name = format!("{}/{}", g.name, m.id);
                        let aligned = compile(&m.aligned, &format!("{name}/aligned"))?;
                        let partial = m
                            .partial
                            .as_ref()
                            .map(|p| compile(p, &format!("{name}/partial")))
                            .transpose()?;
                        Ok((aligned, partial))
                    })
                    .collect()
            })
            .collect()
    }
}

fn port_of(key: &str) -> Option<u16> {
    key.rsplit_once(':').and_then(|(_, p)| p.parse().ok())
}

pub fn milestone_alignment(events: &[TraceEvent], oracle: &MilestoneOracle) -> Result<MilestoneMatrix, PredicateError> {
    let compiled = oracle.compiled()?;
    let evs: Vec<Ev> = events
        .iter()
        .map(|e| {
            let v = serde_json::to_value(&e.body).unwrap_or(Value::Null);
            Ev {
                kind: e.kind(),
                port: e.body.entrypoint_key().as_deref().and_then(port_of),
                payload: v.get("payload").cloned().unwrap_or(Value::Null),
            }
        })
        .collect();
    let groups = oracle
        .groups
        .iter()
        .zip(compiled)
        .map(|(g, preds)| GroupStatus {
            name: g.name.clone(),
            port: g.port,
            milestones: g
                .milestones
                .iter()
                .zip(preds)
                .map(|(m, (aligned, partial))| MilestoneStatus {
                    id: m.id.clone(),
                    name: m.name.clone(),
                    status: if aligned.holds(&evs) {
                        Status::Aligned
                    } else if partial.is_some_and(|p| p.holds(&evs)) {
                        Status::Partial
                    } else {
                        Status::Missing
                    },
                })
                .collect(),
        })
        .collect();
    Ok(MilestoneMatrix {
        oracle: oracle.name.clone(),
        groups,
    })
}
