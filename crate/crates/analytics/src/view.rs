//! Per-entrypoint rollup of a trace.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use explorer_core::domain::{EntryPoint, Outcome};
use explorer_core::trace::{EventBody, RunStarted, TraceEvent};
use explorer_core::Usd;

/// One finished entrypoint, as reported by its `SubgraphEnded` event.
#[derive(Debug, Clone, PartialEq)]
pub struct EntrypointRow {
    pub key: String,
    pub entrypoint: EntryPoint,
    pub outcome: Outcome,
    pub agents: u32,
    pub rounds: u64,
    pub cost: Usd,
    /// `FindingRecorded` events attributed to this entrypoint.
    pub findings: u64,
    /// `SubgraphStarted` to `SubgraphEnded`, 0 when the start is missing.
    pub duration_ms: i64,
}

impl EntrypointRow {
    /// Everything that is not solved counts as a dead end.
    pub fn solved(&self) -> bool {
        self.outcome.is_solved()
    }
}

pub fn run_started(events: &[TraceEvent]) -> Option<(&RunStarted, DateTime<Utc>)> {
    events.iter().find_map(|e| match &e.body {
        EventBody::RunStarted(r) => Some((r, e.wall_clock)),
        _ => None,
    })
}

/// Rows in `SubgraphEnded` order. Entrypoints that never ended are left out.
pub fn entrypoint_rows(events: &[TraceEvent]) -> Vec<EntrypointRow> {
    let mut started: BTreeMap<String, DateTime<Utc>> = BTreeMap::new();
    let mut findings: BTreeMap<String, u64> = BTreeMap::new();
    for e in events {
        match &e.body {
            EventBody::SubgraphStarted(s) => {
                started.insert(s.entrypoint.key(), e.wall_clock);
            }
            EventBody::FindingRecorded(f) => *findings.entry(f.finding.entrypoint.key()).or_default() += 1,
            _ => {}
        }
    }
    events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::SubgraphEnded(s) => {
                let key = s.entrypoint.key();
                Some(EntrypointRow {
                    duration_ms: started
                        .get(&key)
                        .map(|t| (e.wall_clock - *t).num_milliseconds())
                        .unwrap_or(0),
                    findings: findings.get(&key).copied().unwrap_or(0),
                    entrypoint: s.entrypoint.clone(),
                    outcome: s.outcome,
                    agents: s.agents,
                    rounds: s.total_rounds,
                    cost: s.total_cost,
                    key,
                })
            }
            _ => None,
        })
        .collect()
}

/// `(solved, dead_end)` partition.
pub fn split_classes(rows: &[EntrypointRow]) -> (Vec<&EntrypointRow>, Vec<&EntrypointRow>) {
    rows.iter().partition(|r| r.solved())
}
