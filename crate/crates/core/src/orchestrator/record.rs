//! Global state record: append-only exploration history per entrypoint.
//!
//! A single writer task owns the entries; subgraphs talk to it over a
//! channel, so appends and snapshots from one subgraph are seen in order.

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot};

use crate::domain::{AgentRecord, ExitReason, Severity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingSummary {
    pub title: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    /// `host:port`.
    pub entrypoint: String,
    pub agent_id: String,
    pub team_index: u32,
    pub exit_reason: ExitReason,
    pub failed_approaches: Vec<String>,
    pub findings: Vec<FindingSummary>,
    /// Reflection notes and the agent's closing summary.
    pub surface_notes: Vec<String>,
    pub critic_notes: Vec<String>,
}

impl RecordEntry {
    pub fn from_agent(agent: &AgentRecord, summary: Option<&str>) -> Self {
        let mut surface_notes = agent.reflection_notes.clone();
        if let Some(s) = summary.filter(|s| !s.trim().is_empty()) {
            surface_notes.push(s.to_string());
        }
        RecordEntry {
            entrypoint: agent.entrypoint.key(),
            agent_id: agent.agent_id.clone(),
            team_index: agent.team_index,
            exit_reason: agent.exit_reason,
            failed_approaches: agent.failed_approaches.clone(),
            findings: agent
                .findings
                .iter()
                .map(|f| FindingSummary {
                    title: f.title.clone(),
                    severity: f.severity,
                })
                .collect(),
            surface_notes,
            critic_notes: agent.critic_notes.clone(),
        }
    }

    /// Compact text form used in prompts.
    pub fn render(&self) -> String {
        let mut s = format!("- Agent {} ({:?})", self.team_index, self.exit_reason);
        if !self.findings.is_empty() {
            let f: Vec<String> = self
                .findings
                .iter()
                .map(|f| format!("[{}] {}", f.severity, f.title))
                .collect();
            s.push_str(&format!("\n  Findings: {}", f.join("; ")));
        }
        if !self.failed_approaches.is_empty() {
            s.push_str(&format!("\n  Failed approaches: {}", self.failed_approaches.join("; ")));
        }
        if !self.surface_notes.is_empty() {
            s.push_str(&format!("\n  Notes: {}", self.surface_notes.join(" | ")));
        }
        if !self.critic_notes.is_empty() {
            s.push_str(&format!("\n  Critic: {}", self.critic_notes.join(" | ")));
        }
        s
    }
}

pub fn render_entries(entries: &[RecordEntry]) -> String {
    entries.iter().map(RecordEntry::render).collect::<Vec<_>>().join("\n")
}

enum Msg {
    Append(Box<RecordEntry>),
    Snapshot(Option<String>, oneshot::Sender<Vec<RecordEntry>>),
    Len(oneshot::Sender<usize>),
}

/// Cloneable handle to the record's writer task.
#[derive(Clone)]
pub struct GlobalRecord {
    tx: mpsc::UnboundedSender<Msg>,
}

impl GlobalRecord {
    /// Spawns the writer task on the current runtime.
    pub fn spawn() -> Self {
        let (tx, mut rx) = mpsc::unbounded_channel::<Msg>();
        tokio::spawn(async move {
            let mut entries: Vec<RecordEntry> = Vec::new();
            while let Some(msg) = rx.recv().await {
                match msg {
                    Msg::Append(e) => entries.push(*e),
                    Msg::Snapshot(filter, reply) => {
                        let v = entries
                            .iter()
                            .filter(|e| filter.as_ref().is_none_or(|k| &e.entrypoint == k))
                            .cloned()
                            .collect();
                        let _ = reply.send(v);
                    }
                    Msg::Len(reply) => {
                        let _ = reply.send(entries.len());
                    }
                }
            }
        });
        GlobalRecord { tx }
    }

    pub fn append(&self, entry: RecordEntry) {
        let _ = self.tx.send(Msg::Append(Box::new(entry)));
    }

    /// Entries for one entrypoint (`host:port`), oldest first.
    pub async fn history(&self, entrypoint: &str) -> Vec<RecordEntry> {
        self.query(Some(entrypoint.to_string())).await
    }

    pub async fn all(&self) -> Vec<RecordEntry> {
        self.query(None).await
    }

    async fn query(&self, filter: Option<String>) -> Vec<RecordEntry> {
        let (tx, rx) = oneshot::channel();
        if self.tx.send(Msg::Snapshot(filter, tx)).is_err() {
            return Vec::new();
        }
        rx.await.unwrap_or_default()
    }

    pub async fn len(&self) -> usize {
        let (tx, rx) = oneshot::channel();
        if self.tx.send(Msg::Len(tx)).is_err() {
            return 0;
        }
        rx.await.unwrap_or(0)
    }

    pub async fn is_empty(&self) -> bool {
        self.len().await == 0
    }
}
