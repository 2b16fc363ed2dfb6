//! Append-only JSONL event log.
//!
//! Every component reports through a [`TraceSink`]; a single writer thread
//! assigns sequence numbers and timestamps and appends one JSON object per
//! line. The log is the only input analytics ever read.

use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot};

use crate::domain::{
    Caller, Directive, EntryPoint, ExitReason, Fate, Finding, Outcome, Severity,
};
use crate::money::Usd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub wall_clock: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

impl TraceEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    RunStarted,
    EntryPointDiscovered,
    SubgraphStarted,
    AgentSpawned,
    ModelCall,
    ToolExec,
    Reflection,
    BudgetExtended,
    CriticInterjection,
    SupervisorDirective,
    FlagSubmitted,
    FindingRecorded,
    EvidenceWritten,
    AgentExited,
    SubgraphEnded,
    RunEnded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    RunStarted(RunStarted),
    EntryPointDiscovered(EntryPointDiscovered),
    SubgraphStarted(SubgraphStarted),
    AgentSpawned(AgentSpawned),
    ModelCall(ModelCall),
    ToolExec(ToolExec),
    Reflection(Reflection),
    BudgetExtended(BudgetExtended),
    CriticInterjection(CriticInterjection),
    SupervisorDirective(SupervisorDirectiveEvent),
    FlagSubmitted(FlagSubmitted),
    FindingRecorded(FindingRecorded),
    EvidenceWritten(EvidenceWritten),
    AgentExited(AgentExited),
    SubgraphEnded(SubgraphEnded),
    RunEnded(RunEnded),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::RunStarted(_) => EventKind::RunStarted,
            EventBody::EntryPointDiscovered(_) => EventKind::EntryPointDiscovered,
            EventBody::SubgraphStarted(_) => EventKind::SubgraphStarted,
            EventBody::AgentSpawned(_) => EventKind::AgentSpawned,
            EventBody::ModelCall(_) => EventKind::ModelCall,
            EventBody::ToolExec(_) => EventKind::ToolExec,
            EventBody::Reflection(_) => EventKind::Reflection,
            EventBody::BudgetExtended(_) => EventKind::BudgetExtended,
            EventBody::CriticInterjection(_) => EventKind::CriticInterjection,
            EventBody::SupervisorDirective(_) => EventKind::SupervisorDirective,
            EventBody::FlagSubmitted(_) => EventKind::FlagSubmitted,
            EventBody::FindingRecorded(_) => EventKind::FindingRecorded,
            EventBody::EvidenceWritten(_) => EventKind::EvidenceWritten,
            EventBody::AgentExited(_) => EventKind::AgentExited,
            EventBody::SubgraphEnded(_) => EventKind::SubgraphEnded,
            EventBody::RunEnded(_) => EventKind::RunEnded,
        }
    }

    /// Entrypoint key (`host:port`) the event belongs to, if any.
    pub fn entrypoint_key(&self) -> Option<String> {
        match self {
            EventBody::RunStarted(_) | EventBody::RunEnded(_) => None,
            EventBody::EntryPointDiscovered(e) => Some(e.entrypoint.key()),
            EventBody::SubgraphStarted(e) => Some(e.entrypoint.key()),
            EventBody::AgentSpawned(e) => Some(e.entrypoint.clone()),
            EventBody::ModelCall(e) => e.entrypoint.clone(),
            EventBody::ToolExec(e) => Some(e.entrypoint.clone()),
            EventBody::Reflection(e) => Some(e.entrypoint.clone()),
            EventBody::BudgetExtended(e) => Some(e.entrypoint.clone()),
            EventBody::CriticInterjection(e) => Some(e.entrypoint.clone()),
            EventBody::SupervisorDirective(e) => Some(e.entrypoint.clone()),
            EventBody::FlagSubmitted(e) => Some(e.entrypoint.clone()),
            EventBody::FindingRecorded(e) => Some(e.finding.entrypoint.key()),
            EventBody::EvidenceWritten(e) => Some(e.entrypoint.clone()),
            EventBody::AgentExited(e) => Some(e.entrypoint.clone()),
            EventBody::SubgraphEnded(e) => Some(e.entrypoint.key()),
        }
    }
}

/// Run-level settings recorded at start so a trace is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub parallel_subgraphs: u32,
    pub team_size: u32,
    pub base_budget: Usd,
    pub max_extensions: u32,
    pub reflection_thresholds: Vec<f64>,
    pub critic_after_failures: u32,
    pub dead_end_attempts: u32,
    pub dead_end_min_severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStarted {
    pub run_id: String,
    pub model: String,
    #[serde(default)]
    pub label: Option<String>,
    pub settings: RunSettings,
    pub total_challenges: u32,
    /// Challenge name per entrypoint key, from the ground truth.
    #[serde(default)]
    pub challenges: std::collections::BTreeMap<String, String>,
    pub entrypoints: Vec<EntryPoint>,
    /// Opaque description of the backend and sandbox sufficient to re-run a
    /// scripted run.
    #[serde(default)]
    pub replay: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryPointDiscovered {
    pub entrypoint: EntryPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphStarted {
    pub entrypoint: EntryPoint,
    pub batch: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpawned {
    pub agent_id: String,
    pub entrypoint: String,
    pub team_index: u32,
    pub sandbox_id: String,
    #[serde(default)]
    pub directive: Option<Directive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCall {
    pub caller: Caller,
    #[serde(default)]
    pub agent_id: Option<String>,
    #[serde(default)]
    pub entrypoint: Option<String>,
    pub model: String,
    #[serde(default)]
    pub round: Option<u32>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: Usd,
    pub attempts: u32,
    pub finish_kind: String,
    /// Short content digests of the request messages, for lineage checks.
    #[serde(default)]
    pub message_digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolExec {
    pub agent_id: String,
    pub entrypoint: String,
    pub round: u32,
    pub tool: String,
    pub command: String,
    pub exit_code: i64,
    pub output: String,
    pub truncated: bool,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub agent_id: String,
    pub entrypoint: String,
    pub threshold: f64,
    pub spent: Usd,
    pub cap: Usd,
    pub epoch: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetExtended {
    pub agent_id: String,
    pub entrypoint: String,
    pub extensions: u32,
    pub new_cap: Usd,
    pub spent: Usd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticInterjection {
    pub agent_id: String,
    pub entrypoint: String,
    pub threshold: f64,
    pub consecutive_failures: u32,
    pub message: String,
    /// True when the agent had already captured the flag; the verdict is
    /// kept for the record but has no effect.
    #[serde(default)]
    pub after_solve: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorDirectiveEvent {
    pub entrypoint: String,
    pub next_agent_index: u32,
    pub directive: Directive,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagSubmitted {
    pub agent_id: String,
    pub entrypoint: String,
    pub value: String,
    pub correct: bool,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingRecorded {
    pub finding: Finding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceWritten {
    pub agent_id: String,
    pub entrypoint: String,
    /// Path relative to the run workspace.
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentExited {
    pub agent_id: String,
    pub entrypoint: String,
    pub team_index: u32,
    pub exit_reason: ExitReason,
    pub rounds: u32,
    pub cost: Usd,
    pub extensions: u32,
    #[serde(default)]
    pub fate: Option<Fate>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphEnded {
    pub entrypoint: EntryPoint,
    pub outcome: Outcome,
    pub agents: u32,
    pub total_rounds: u64,
    pub total_cost: Usd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnded {
    pub subgraphs: u32,
    pub solved: u32,
}

/// Source of event timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock advancing a fixed step on every read.
pub struct StepClock {
    start: DateTime<Utc>,
    step_micros: i64,
    ticks: AtomicI64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        StepClock {
            start,
            step_micros: step.num_microseconds().unwrap_or(0),
            ticks: AtomicI64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let t = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + Duration::microseconds(t * self.step_micros)
    }
}

enum Msg {
    Event(EventBody),
    Finish(oneshot::Sender<io::Result<Vec<TraceEvent>>>),
}

/// Cloneable handle for emitting events. A disabled sink drops everything.
#[derive(Clone)]
pub struct TraceSink {
    tx: Option<mpsc::UnboundedSender<Msg>>,
}

impl std::fmt::Debug for TraceSink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceSink").field("enabled", &self.tx.is_some()).finish()
    }
}

impl TraceSink {
    pub fn disabled() -> Self {
        TraceSink { tx: None }
    }

    pub fn emit(&self, body: EventBody) {
        if let Some(tx) = &self.tx {
            // A closed writer means the run is shutting down; late events are dropped.
            let _ = tx.send(Msg::Event(body));
        }
    }

    /// Flushes the writer and returns every event written so far, in order.
    /// Further events are dropped.
    pub async fn finish(&self) -> io::Result<Vec<TraceEvent>> {
        let Some(tx) = &self.tx else {
            return Ok(Vec::new());
        };
        let (done_tx, done_rx) = oneshot::channel();
        if tx.send(Msg::Finish(done_tx)).is_err() {
            return Err(io::Error::other("trace writer already finished"));
        }
        done_rx
            .await
            .unwrap_or_else(|_| Err(io::Error::other("trace writer terminated")))
    }
}

/// Starts the single writer thread. Events are appended to `out` (if any)
/// as JSONL and also retained in memory for [`TraceSink::finish`].
pub fn spawn_writer(out: Option<Box<dyn Write + Send>>, clock: Arc<dyn Clock>) -> TraceSink {
    let (tx, mut rx) = mpsc::unbounded_channel::<Msg>();
    std::thread::Builder::new()
        .name("trace-writer".into())
        .spawn(move || {
            let mut out = out.map(BufWriter::new);
            let mut events = Vec::new();
            let mut failure: Option<io::Error> = None;
            let mut seq = 0u64;
            while let Some(msg) = rx.blocking_recv() {
                match msg {
                    Msg::Event(body) => {
                        seq += 1;
                        let ev = TraceEvent {
                            seq,
                            wall_clock: clock.now(),
                            body,
                        };
                        if let (Some(w), None) = (out.as_mut(), failure.as_ref()) {
                            if let Err(e) = write_line(w, &ev) {
                                failure = Some(e);
                            }
                        }
                        events.push(ev);
                    }
                    Msg::Finish(done) => {
                        let flushed = match (out.as_mut(), failure.take()) {
                            (_, Some(e)) => Err(e),
                            (Some(w), None) => w.flush(),
                            (None, None) => Ok(()),
                        };
                        let _ = done.send(flushed.map(|_| std::mem::take(&mut events)));
                        return;
                    }
                }
            }
            if let Some(w) = out.as_mut() {
                let _ = w.flush();
            }
        })
        .expect("spawning trace writer thread");
    TraceSink { tx: Some(tx) }
}

fn write_line<W: Write>(w: &mut W, ev: &TraceEvent) -> io::Result<()> {
    serde_json::to_writer(&mut *w, ev).map_err(io::Error::other)?;
    w.write_all(b"\n")
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("reading trace: {0}")]
    Io(#[from] io::Error),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace line {line}: seq {seq} does not increase (previous {prev})")]
    NonMonotonic { line: usize, seq: u64, prev: u64 },
}

/// Parses JSONL text, enforcing strictly increasing `seq`.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    read_trace_from(text.as_bytes())
}

pub fn read_trace_from<R: BufRead>(reader: R) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events: Vec<TraceEvent> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(&line).map_err(|source| TraceError::Parse {
            line: idx + 1,
            source,
        })?;
        if let Some(prev) = events.last() {
            if ev.seq <= prev.seq {
                return Err(TraceError::NonMonotonic {
                    line: idx + 1,
                    seq: ev.seq,
                    prev: prev.seq,
                });
            }
        }
        events.push(ev);
    }
    Ok(events)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceEvent>, TraceError> {
    let f = std::fs::File::open(path)?;
    read_trace_from(io::BufReader::new(f))
}

pub fn write_trace<W: Write>(w: W, events: &[TraceEvent]) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for ev in events {
        write_line(&mut w, ev)?;
    }
    w.flush()
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}
