//! Metric operations. Each is a pure function of the event list.
//!
//! Class convention: an entrypoint is *solved* when its chain ended with
//! outcome `Solved`; every other outcome is a *dead end*. Means over an
//! empty class are absent and render as "n/a".

use std::collections::{BTreeMap, BTreeSet};

use explorer_core::domain::{ExitReason, Finding, GroundTruth, Severity};
use explorer_core::extraction::{owasp_map, OwaspDistribution, OwaspTable};
use explorer_core::trace::{EventBody, TraceEvent};
use explorer_core::Usd;
use serde::Serialize;

use crate::frac::{mean, Frac};
use crate::view::{entrypoint_rows, run_started, split_classes, EntrypointRow};

pub const MICROS: i128 = explorer_core::money::MICROS_PER_UNIT as i128;

fn cost_micros<'a>(rows: impl IntoIterator<Item = &'a &'a EntrypointRow>) -> i128 {
    rows.into_iter().map(|r| r.cost.micros() as i128).sum()
}

/// Mean dollars per item from a micro-dollar total.
fn mean_cost(total_micros: i128, n: usize) -> Option<Frac> {
    Frac::new(total_micros, n as i128 * MICROS)
}

// ---------------------------------------------------------------- outcomes

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub found: u64,
    pub correct: u64,
    pub wrong: u64,
    pub total_challenges: u64,
    /// Absent when nothing was found.
    pub precision: Option<Frac>,
    pub recall: Option<Frac>,
}

/// Per-challenge flag classification. Entrypoints map to challenges through
/// `manifest` when given, else through the map recorded in `RunStarted`;
/// unmapped entrypoints are their own challenge.
pub fn classify_outcomes(events: &[TraceEvent], manifest: Option<&GroundTruth>) -> OutcomeCounts {
    let run = run_started(events).map(|(r, _)| r);
    let map = match (manifest, run) {
        (Some(m), _) => m.challenge_map(),
        (None, Some(r)) => r.challenges.clone(),
        (None, None) => BTreeMap::new(),
    };
    let total = match (manifest, run) {
        (Some(m), _) => m.challenge_count() as u64,
        (None, Some(r)) => r.total_challenges as u64,
        (None, None) => 0,
    };
    // challenge -> any correct submission
    let mut submitted: BTreeMap<String, bool> = BTreeMap::new();
    for e in events {
        if let EventBody::FlagSubmitted(f) = &e.body {
            let challenge = map.get(&f.entrypoint).cloned().unwrap_or_else(|| f.entrypoint.clone());
            *submitted.entry(challenge).or_default() |= f.correct;
        }
    }
    let correct = submitted.values().filter(|c| **c).count() as u64;
    let found = submitted.len() as u64;
    OutcomeCounts {
        tp: correct,
        fp: found - correct,
        fn_: total.saturating_sub(found),
        found,
        correct,
        wrong: found - correct,
        total_challenges: total,
        precision: Frac::new(correct as i128, found as i128),
        recall: Frac::new(correct as i128, total as i128),
    }
}

// ------------------------------------------------------------------- ttff

/// Milliseconds from `RunStarted` to the first correct flag.
pub fn ttff(events: &[TraceEvent]) -> Option<i64> {
    let (_, t0) = run_started(events)?;
    events.iter().find_map(|e| match &e.body {
        EventBody::FlagSubmitted(f) if f.correct => Some((e.wall_clock - t0).num_milliseconds()),
        _ => None,
    })
}

// ------------------------------------------------------------ run summary

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: Option<String>,
    pub model: String,
    pub outcomes: OutcomeCounts,
    pub entrypoints: u64,
    /// Per-entrypoint means over all entrypoints.
    pub avg_rounds: Option<Frac>,
    pub avg_cost: Option<Frac>,
    pub total_agents: u64,
    /// Mean seconds per entrypoint, start to end of its chain.
    pub avg_time_s: Option<Frac>,
    pub ttff_s: Option<Frac>,
}

pub fn model_label(events: &[TraceEvent]) -> String {
    run_started(events)
        .map(|(r, _)| r.label.clone().unwrap_or_else(|| r.model.clone()))
        .unwrap_or_default()
}

pub fn run_summary(events: &[TraceEvent], manifest: Option<&GroundTruth>) -> RunSummary {
    let rows = entrypoint_rows(events);
    let n = rows.len();
    RunSummary {
        run_id: run_started(events).map(|(r, _)| r.run_id.clone()),
        model: model_label(events),
        outcomes: classify_outcomes(events, manifest),
        entrypoints: n as u64,
        avg_rounds: mean(rows.iter().map(|r| r.rounds as i128).sum(), n),
        avg_cost: mean_cost(cost_micros(&rows.iter().collect::<Vec<_>>()), n),
        total_agents: rows.iter().map(|r| r.agents as u64).sum(),
        avg_time_s: Frac::new(rows.iter().map(|r| r.duration_ms as i128).sum(), n as i128 * 1000),
        ttff_s: ttff(events).and_then(|ms| Frac::new(ms as i128, 1000)),
    }
}

// ------------------------------------------------------- round distributions

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub values: Vec<u64>,
    pub mean: Option<Frac>,
    pub median: Option<Frac>,
    /// Nearest-rank 90th percentile.
    pub p90: Option<u64>,
}

impl Distribution {
    pub fn of(values: Vec<u64>) -> Distribution {
        let mut sorted = values.clone();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = match n {
            0 => None,
            _ if n % 2 == 1 => Some(Frac::int(sorted[n / 2] as i128)),
            _ => Frac::new(sorted[n / 2 - 1] as i128 + sorted[n / 2] as i128, 2),
        };
        let p90 = (n > 0).then(|| sorted[(9 * n).div_ceil(10) - 1]);
        Distribution {
            mean: mean(values.iter().map(|v| *v as i128).sum(), n),
            values,
            median,
            p90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundDistributions {
    pub solved: Distribution,
    pub dead_end: Distribution,
}

pub fn round_distributions(events: &[TraceEvent]) -> RoundDistributions {
    let rows = entrypoint_rows(events);
    let (s, d) = split_classes(&rows);
    RoundDistributions {
        solved: Distribution::of(s.iter().map(|r| r.rounds).collect()),
        dead_end: Distribution::of(d.iter().map(|r| r.rounds).collect()),
    }
}

// ------------------------------------------------------------ persistence

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceReport {
    pub solved_rounds: Option<Frac>,
    pub dead_end_rounds: Option<Frac>,
    /// Dead-end mean over solved mean.
    pub round_ratio: Option<Frac>,
    pub solved_cost: Option<Frac>,
    pub dead_end_cost: Option<Frac>,
    pub cost_ratio: Option<Frac>,
}

fn ratio(dead: Option<Frac>, solved: Option<Frac>) -> Option<Frac> {
    dead?.div(solved?)
}

pub fn persistence(events: &[TraceEvent]) -> PersistenceReport {
    let rows = entrypoint_rows(events);
    let (s, d) = split_classes(&rows);
    let rounds = |c: &[&EntrypointRow]| mean(c.iter().map(|r| r.rounds as i128).sum(), c.len());
    let (sr, dr) = (rounds(&s), rounds(&d));
    let (sc, dc) = (mean_cost(cost_micros(&s), s.len()), mean_cost(cost_micros(&d), d.len()));
    PersistenceReport {
        solved_rounds: sr,
        dead_end_rounds: dr,
        round_ratio: ratio(dr, sr),
        solved_cost: sc,
        dead_end_cost: dc,
        cost_ratio: ratio(dc, sc),
    }
}

// ------------------------------------------------------------------ exits

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitBreakdown {
    pub total: u64,
    pub counts: BTreeMap<ExitReason, u64>,
    pub fractions: BTreeMap<ExitReason, Frac>,
}

pub fn exit_breakdown(events: &[TraceEvent]) -> ExitBreakdown {
    let mut counts: BTreeMap<ExitReason, u64> = BTreeMap::new();
    for e in events {
        if let EventBody::AgentExited(a) = &e.body {
            *counts.entry(a.exit_reason).or_default() += 1;
        }
    }
    let total: u64 = counts.values().sum();
    let fractions = counts
        .iter()
        .filter_map(|(k, v)| Frac::new(*v as i128, total as i128).map(|f| (*k, f)))
        .collect();
    ExitBreakdown { total, counts, fractions }
}

// ------------------------------------------------------- discovery signal

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoverySignal {
    /// Over all entrypoints.
    pub findings_per_entrypoint: Option<Frac>,
    pub solved_findings: Option<Frac>,
    pub dead_end_findings: Option<Frac>,
    /// Share of dead-end entrypoints with at least one finding.
    pub signal_rate: Option<Frac>,
}

pub fn discovery_signal(events: &[TraceEvent]) -> DiscoverySignal {
    let rows = entrypoint_rows(events);
    let (s, d) = split_classes(&rows);
    let total = |c: &[&EntrypointRow]| c.iter().map(|r| r.findings as i128).sum::<i128>();
    DiscoverySignal {
        findings_per_entrypoint: mean(rows.iter().map(|r| r.findings as i128).sum(), rows.len()),
        solved_findings: mean(total(&s), s.len()),
        dead_end_findings: mean(total(&d), d.len()),
        signal_rate: mean(d.iter().filter(|r| r.findings > 0).count() as i128, d.len()),
    }
}

// --------------------------------------------------------------- severity

/// Counts per level, highest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeverityHistogram {
    pub counts: [u64; 5],
}

impl SeverityHistogram {
    pub fn get(&self, s: Severity) -> u64 {
        self.counts[Severity::ALL.iter().position(|x| *x == s).expect("all levels listed")]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl Serialize for SeverityHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(5))?;
        for (lvl, n) in Severity::ALL.iter().zip(self.counts) {
            m.serialize_entry(lvl.as_str(), &n)?;
        }
        m.end()
    }
}

pub fn severity_histogram<'a>(findings: impl IntoIterator<Item = &'a Finding>) -> SeverityHistogram {
    let mut h = SeverityHistogram::default();
    for f in findings {
        let i = Severity::ALL.iter().position(|x| *x == f.severity).expect("all levels listed");
        h.counts[i] += 1;
    }
    h
}

pub fn recorded_findings(events: &[TraceEvent]) -> Vec<&Finding> {
    events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::FindingRecorded(f) => Some(&f.finding),
            _ => None,
        })
        .collect()
}

pub fn owasp(events: &[TraceEvent], table: &OwaspTable) -> OwaspDistribution {
    owasp_map(
        recorded_findings(events)
            .into_iter()
            .map(|f| (f.title.as_str(), f.description.as_str())),
        table,
    )
}

// ------------------------------------------------------------- escalation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscalationReport {
    pub base_budget: Option<Usd>,
    pub team_size: Option<u32>,
    pub entrypoints: u64,
    pub solved: u64,
    pub dead_end: u64,
    pub total_agents: u64,
    /// Agents spawned per entrypoint.
    pub inflation: Option<Frac>,
    pub avg_agents_solved: Option<Frac>,
    pub avg_agents_dead_end: Option<Frac>,
    /// Depth: rounds per entrypoint.
    pub rounds_per_entrypoint: Option<Frac>,
    /// Continuity: rounds per agent.
    pub rounds_per_agent: Option<Frac>,
    pub cost_per_entrypoint: Option<Frac>,
    /// Mean rounds over mean cost.
    pub rounds_per_cost: Option<Frac>,
    pub solve_rate: Option<Frac>,
}

pub fn escalation(events: &[TraceEvent]) -> EscalationReport {
    let settings = run_started(events).map(|(r, _)| &r.settings);
    let rows = entrypoint_rows(events);
    let (s, d) = split_classes(&rows);
    let agents = |c: &[&EntrypointRow]| c.iter().map(|r| r.agents as i128).sum::<i128>();
    let n = rows.len();
    let total_agents: i128 = rows.iter().map(|r| r.agents as i128).sum();
    let rounds: i128 = rows.iter().map(|r| r.rounds as i128).sum();
    let cost = cost_micros(&rows.iter().collect::<Vec<_>>());
    let rounds_pe = mean(rounds, n);
    let cost_pe = mean_cost(cost, n);
    EscalationReport {
        base_budget: settings.map(|s| s.base_budget),
        team_size: settings.map(|s| s.team_size),
        entrypoints: n as u64,
        solved: s.len() as u64,
        dead_end: d.len() as u64,
        total_agents: total_agents as u64,
        inflation: mean(total_agents, n),
        avg_agents_solved: mean(agents(&s), s.len()),
        avg_agents_dead_end: mean(agents(&d), d.len()),
        rounds_per_entrypoint: rounds_pe,
        rounds_per_agent: Frac::new(rounds, total_agents),
        cost_per_entrypoint: cost_pe,
        rounds_per_cost: ratio(rounds_pe, cost_pe),
        solve_rate: mean(s.len() as i128, n),
    }
}

// --------------------------------------------------------------- evidence

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceSummary {
    pub agents_with_evidence: u64,
    /// Distinct (agent, path) pairs; rewriting a file does not count twice.
    pub total_files: u64,
}

pub fn evidence_summary(events: &[TraceEvent]) -> EvidenceSummary {
    let mut files = BTreeSet::new();
    for e in events {
        if let EventBody::EvidenceWritten(w) = &e.body {
            files.insert((w.agent_id.as_str(), w.path.as_str()));
        }
    }
    let agents: BTreeSet<&str> = files.iter().map(|(a, _)| *a).collect();
    EvidenceSummary {
        agents_with_evidence: agents.len() as u64,
        total_files: files.len() as u64,
    }
}

// ------------------------------------------------------- plot-ready series

/// Agents spawned per entrypoint, with its class, in end order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntrypointPoint {
    pub entrypoint: String,
    pub solved: bool,
    pub agents: u32,
    pub rounds: u64,
    pub cost: Usd,
    pub findings: u64,
}

pub fn entrypoint_series(events: &[TraceEvent]) -> Vec<EntrypointPoint> {
    entrypoint_rows(events)
        .into_iter()
        .map(|r| EntrypointPoint {
            solved: r.solved(),
            entrypoint: r.key,
            agents: r.agents,
            rounds: r.rounds,
            cost: r.cost,
            findings: r.findings,
        })
        .collect()
}
