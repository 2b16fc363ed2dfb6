//! The analysis report, its printed table rows, multi-run comparison, and
//! plot series files.
//!
//! Rounding per table: outcome and cost summaries round half-up to two
//! decimals; persistence ratios half-up to one decimal with `×`; discovery
//! signal rounds the float value (two decimals for means, one for the
//! rate); escalation and comparison columns half-up to three decimals.

use std::io;
use std::path::Path;

use explorer_core::domain::{ExitReason, GroundTruth, Severity};
use explorer_core::extraction::{OwaspDistribution, OwaspTable};
use explorer_core::trace::TraceEvent;
use serde::Serialize;

use crate::frac::{Frac, Rounding};
use crate::metrics::*;
use crate::milestones::{milestone_alignment, MilestoneMatrix, MilestoneOracle, PredicateError};

pub const UNDEFINED: &str = "n/a";

fn fmt(v: Option<Frac>, digits: u32, mode: Rounding) -> String {
    v.map(|f| f.render(digits, mode)).unwrap_or_else(|| UNDEFINED.into())
}

fn pct(v: Option<Frac>, digits: u32, mode: Rounding) -> String {
    v.map(|f| format!("{}%", f.scale(100).render(digits, mode)))
        .unwrap_or_else(|| UNDEFINED.into())
}

/// Half-up to one decimal with a trailing `×`.
pub fn ratio_label(v: Option<Frac>) -> String {
    v.map(|f| format!("{}×", f.render(1, Rounding::HalfUp)))
        .unwrap_or_else(|| UNDEFINED.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerformanceRow {
    pub model: String,
    pub found: u64,
    pub correct: u64,
    pub wrong: u64,
    pub precision: String,
    pub recall: String,
    pub avg_rounds: String,
    pub avg_cost: String,
    pub agents: u64,
    pub avg_time_s: String,
    pub ttff_s: String,
}

impl PerformanceRow {
    pub fn of(s: &RunSummary) -> Self {
        let h = Rounding::HalfUp;
        PerformanceRow {
            model: s.model.clone(),
            found: s.outcomes.found,
            correct: s.outcomes.correct,
            wrong: s.outcomes.wrong,
            precision: pct(s.outcomes.precision, 2, h),
            recall: pct(s.outcomes.recall, 2, h),
            avg_rounds: fmt(s.avg_rounds, 2, h),
            avg_cost: fmt(s.avg_cost, 2, h),
            agents: s.total_agents,
            avg_time_s: fmt(s.avg_time_s, 2, h),
            ttff_s: fmt(s.ttff_s, 2, h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersistenceRow {
    pub model: String,
    pub solved_rounds: String,
    pub dead_end_rounds: String,
    pub round_ratio: String,
    pub solved_cost: String,
    pub dead_end_cost: String,
    pub cost_ratio: String,
}

impl PersistenceRow {
    pub fn of(model: &str, p: &PersistenceReport) -> Self {
        let h = Rounding::HalfUp;
        PersistenceRow {
            model: model.into(),
            solved_rounds: fmt(p.solved_rounds, 2, h),
            dead_end_rounds: fmt(p.dead_end_rounds, 2, h),
            round_ratio: ratio_label(p.round_ratio),
            solved_cost: fmt(p.solved_cost, 2, h),
            dead_end_cost: fmt(p.dead_end_cost, 2, h),
            cost_ratio: ratio_label(p.cost_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalRow {
    pub model: String,
    pub findings_per_entrypoint: String,
    pub solved: String,
    pub dead_end: String,
    pub signal_rate: String,
}

impl SignalRow {
    pub fn of(model: &str, d: &DiscoverySignal) -> Self {
        let e = Rounding::Float;
        SignalRow {
            model: model.into(),
            findings_per_entrypoint: fmt(d.findings_per_entrypoint, 2, e),
            solved: fmt(d.solved_findings, 2, e),
            dead_end: fmt(d.dead_end_findings, 2, e),
            signal_rate: pct(d.signal_rate, 1, e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EscalationRow {
    pub model: String,
    pub base_budget: String,
    pub team_size: String,
    pub entrypoints: u64,
    pub agents: u64,
    pub inflation: String,
    pub solved_agents: String,
    pub dead_end_agents: String,
    pub rounds_per_entrypoint: String,
    pub rounds_per_agent: String,
}

impl EscalationRow {
    pub fn of(model: &str, x: &EscalationReport) -> Self {
        let h = Rounding::HalfUp;
        EscalationRow {
            model: model.into(),
            base_budget: fmt(x.base_budget.and_then(|b| Frac::new(b.micros() as i128, MICROS)), 2, h),
            team_size: x.team_size.map(|t| t.to_string()).unwrap_or_else(|| UNDEFINED.into()),
            entrypoints: x.entrypoints,
            agents: x.total_agents,
            inflation: fmt(x.inflation, 3, h),
            solved_agents: fmt(x.avg_agents_solved, 3, h),
            dead_end_agents: fmt(x.avg_agents_dead_end, 3, h),
            rounds_per_entrypoint: fmt(x.rounds_per_entrypoint, 2, h),
            rounds_per_agent: fmt(x.rounds_per_agent, 2, h),
        }
    }
}

/// One configuration in a regime comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegimeRow {
    pub model: String,
    pub base_budget: String,
    pub team_size: String,
    pub solved: u64,
    pub dead_end: u64,
    pub solve_rate: String,
    pub agents_per_entrypoint: String,
    pub rounds_per_entrypoint: String,
    pub cost_per_entrypoint: String,
    pub rounds_per_cost: String,
}

impl RegimeRow {
    pub fn of(model: &str, x: &EscalationReport) -> Self {
        let h = Rounding::HalfUp;
        let e = EscalationRow::of(model, x);
        RegimeRow {
            model: model.into(),
            base_budget: e.base_budget,
            team_size: e.team_size,
            solved: x.solved,
            dead_end: x.dead_end,
            solve_rate: fmt(x.solve_rate.map(|f| f.scale(100)), 3, h),
            agents_per_entrypoint: fmt(x.inflation, 3, h),
            rounds_per_entrypoint: fmt(x.rounds_per_entrypoint, 3, h),
            cost_per_entrypoint: fmt(x.cost_per_entrypoint, 3, h),
            rounds_per_cost: fmt(x.rounds_per_cost, 3, h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tables {
    pub performance: PerformanceRow,
    pub persistence: PersistenceRow,
    pub signal: SignalRow,
    pub severity: SeverityHistogram,
    pub escalation: EscalationRow,
    pub regime: RegimeRow,
    pub evidence: EvidenceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub milestones: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub model: String,
    pub summary: RunSummary,
    pub rounds: RoundDistributions,
    pub persistence: PersistenceReport,
    pub exits: ExitBreakdown,
    pub signal: DiscoverySignal,
    pub severity: SeverityHistogram,
    pub owasp: OwaspDistribution,
    pub escalation: EscalationReport,
    pub evidence: EvidenceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub milestones: Option<MilestoneMatrix>,
    pub series: Vec<EntrypointPoint>,
    pub tables: Tables,
}

pub fn analyze(
    events: &[TraceEvent],
    manifest: Option<&GroundTruth>,
    oracle: Option<&MilestoneOracle>,
    owasp_table: &OwaspTable,
) -> Result<AnalysisReport, PredicateError> {
    let summary = run_summary(events, manifest);
    let model = summary.model.clone();
    let persistence = persistence(events);
    let signal = discovery_signal(events);
    let severity = severity_histogram(recorded_findings(events));
    let escalation = escalation(events);
    let evidence = evidence_summary(events);
    let milestones = oracle.map(|o| milestone_alignment(events, o)).transpose()?;
    let tables = Tables {
        performance: PerformanceRow::of(&summary),
        persistence: PersistenceRow::of(&model, &persistence),
        signal: SignalRow::of(&model, &signal),
        severity: severity.clone(),
        escalation: EscalationRow::of(&model, &escalation),
        regime: RegimeRow::of(&model, &escalation),
        evidence: evidence.clone(),
        milestones: milestones.as_ref().map(|m| m.symbols()),
    };
    Ok(AnalysisReport {
        rounds: round_distributions(events),
        exits: exit_breakdown(events),
        owasp: owasp(events, owasp_table),
        series: entrypoint_series(events),
        model,
        summary,
        persistence,
        signal,
        severity,
        escalation,
        evidence,
        milestones,
        tables,
    })
}

/// Side-by-side rows for several runs, e.g. one per budget regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub performance: Vec<PerformanceRow>,
    pub persistence: Vec<PersistenceRow>,
    pub signal: Vec<SignalRow>,
    pub escalation: Vec<EscalationRow>,
    pub regimes: Vec<RegimeRow>,
}

pub fn compare(reports: &[AnalysisReport]) -> Comparison {
    Comparison {
        performance: reports.iter().map(|r| r.tables.performance.clone()).collect(),
        persistence: reports.iter().map(|r| r.tables.persistence.clone()).collect(),
        signal: reports.iter().map(|r| r.tables.signal.clone()).collect(),
        escalation: reports.iter().map(|r| r.tables.escalation.clone()).collect(),
        regimes: reports.iter().map(|r| r.tables.regime.clone()).collect(),
    }
}

fn csv_line(cells: &[String]) -> String {
    cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut out = csv_line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(&r));
        out.push('\n');
    }
    std::fs::write(path, out)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Writes plot-ready series (CSV plus JSON) for one report into `dir`.
pub fn write_plots(report: &AnalysisReport, dir: &Path) -> io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut note = |name: &str| written.push(name.to_string());

    write_json(&dir.join("round_distribution.json"), &report.rounds)?;
    note("round_distribution.json");
    let rounds = report
        .rounds
        .solved
        .values
        .iter()
        .map(|v| vec!["solved".into(), v.to_string()])
        .chain(report.rounds.dead_end.values.iter().map(|v| vec!["dead_end".into(), v.to_string()]));
    write_csv(&dir.join("round_distribution.csv"), &["class", "rounds"], rounds)?;
    note("round_distribution.csv");

    let exits = ExitReason::ALL.iter().map(|r| {
        let n = report.exits.counts.get(r).copied().unwrap_or(0);
        let f = report.exits.fractions.get(r).map(|f| f.to_f64()).unwrap_or(0.0);
        vec![format!("{r:?}"), n.to_string(), format!("{f:.6}")]
    });
    write_csv(&dir.join("exit_breakdown.csv"), &["exit_reason", "count", "fraction"], exits)?;
    note("exit_breakdown.csv");

    let sev = Severity::ALL
        .iter()
        .map(|s| vec![s.as_str().to_string(), report.severity.get(*s).to_string()]);
    write_csv(&dir.join("severity.csv"), &["severity", "count"], sev)?;
    note("severity.csv");

    let eps = report.series.iter().map(|p| {
        vec![
            p.entrypoint.clone(),
            if p.solved { "solved" } else { "dead_end" }.into(),
            p.agents.to_string(),
            p.rounds.to_string(),
            p.cost.to_string(),
            p.findings.to_string(),
        ]
    });
    write_csv(
        &dir.join("entrypoints.csv"),
        &["entrypoint", "class", "agents", "rounds", "cost", "findings"],
        eps,
    )?;
    note("entrypoints.csv");

    let ow = report
        .owasp
        .counts
        .iter()
        .map(|(k, v)| vec![k.clone(), v.to_string(), format!("{:.6}", report.owasp.distribution[k])]);
    write_csv(&dir.join("owasp.csv"), &["category", "count", "share"], ow)?;
    note("owasp.csv");

    if let Some(ttff) = report.summary.ttff_s {
        write_json(&dir.join("ttff.json"), &serde_json::json!({ "model": report.model, "ttff_s": ttff }))?;
        note("ttff.json");
    }
    Ok(written)
}

/// Regime comparison as CSV.
pub fn write_comparison_csv(cmp: &Comparison, path: &Path) -> io::Result<()> {
    let rows = cmp.regimes.iter().map(|r| {
        vec![
            r.model.clone(),
            r.base_budget.clone(),
            r.team_size.clone(),
            r.solved.to_string(),
            r.dead_end.to_string(),
            r.solve_rate.clone(),
            r.agents_per_entrypoint.clone(),
            r.rounds_per_entrypoint.clone(),
            r.cost_per_entrypoint.clone(),
            r.rounds_per_cost.clone(),
        ]
    });
    write_csv(
        path,
        &[
            "model",
            "base_budget",
            "team_size",
            "solved",
            "dead_end",
            "solve_rate",
            "agents_per_entrypoint",
            "rounds_per_entrypoint",
            "cost_per_entrypoint",
            "rounds_per_cost",
        ],
        rows,
    )
}
