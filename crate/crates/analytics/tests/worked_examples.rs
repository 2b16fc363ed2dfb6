//! Small hand-checked cases for each metric.

use std::path::PathBuf;

use explorer_analytics::metrics::*;
use explorer_analytics::report::{analyze, ratio_label, PerformanceRow, PersistenceRow, SignalRow};
use explorer_analytics::synth::{epoch, settings, AgentScript, ChainScript, TraceBuilder};
use explorer_analytics::{milestone_alignment, Frac, MilestoneOracle, PredicateError};
use explorer_core::domain::{EntryPoint, ExitReason, Outcome, ServiceKind, Severity};
use explorer_core::extraction::OwaspTable;
use explorer_core::trace::*;
use explorer_core::Usd;

fn ep(port: u16) -> EntryPoint {
    EntryPoint::new("10.0.0.5", port, ServiceKind::Http)
}

fn started(eps: &[EntryPoint]) -> TraceBuilder {
    let mut b = TraceBuilder::new(epoch());
    b.push(EventBody::RunStarted(RunStarted {
        run_id: "r".into(),
        model: "m".into(),
        label: None,
        settings: settings(Usd::from_micros(300_000), 7),
        total_challenges: eps.len() as u32,
        challenges: Default::default(),
        entrypoints: eps.to_vec(),
        replay: None,
    }));
    b
}

fn agent(rounds: u32, exit: ExitReason) -> AgentScript {
    AgentScript::new(rounds, Usd::from_micros(100_000), exit)
}

fn chain(b: &mut TraceBuilder, port: u16, outcome: Outcome, agents: Vec<AgentScript>) {
    b.chain(
        &ChainScript {
            entrypoint: ep(port),
            outcome,
            agents,
            duration_ms: 1000,
        },
        0,
    );
}

#[test]
fn no_submissions_leaves_precision_undefined() {
    let mut b = started(&[ep(1)]);
    chain(&mut b, 1, Outcome::DeadEnd, vec![agent(5, ExitReason::GiveUp)]);
    let s = run_summary(&b.finish(), None);
    assert_eq!(s.outcomes.precision, None);
    assert_eq!(PerformanceRow::of(&s).precision, "n/a");
    assert_eq!(PerformanceRow::of(&s).recall, "0.00%");
}

#[test]
fn solved_means_over_ten_twenty_thirty() {
    let mut b = started(&[ep(1), ep(2), ep(3)]);
    for (port, r) in [(1, 10), (2, 20), (3, 30)] {
        chain(&mut b, port, Outcome::Solved, vec![agent(r, ExitReason::Solved)]);
    }
    let events = b.finish();
    let p = persistence(&events);
    assert_eq!(p.solved_rounds, Some(Frac::int(20)));
    assert_eq!(p.dead_end_rounds, None);
    let row = PersistenceRow::of("m", &p);
    assert_eq!((row.solved_rounds.as_str(), row.dead_end_rounds.as_str(), row.round_ratio.as_str()), ("20.00", "n/a", "n/a"));
    let d = round_distributions(&events);
    assert_eq!((d.solved.median, d.solved.p90), (Some(Frac::int(20)), Some(30)));
    assert!(d.dead_end.values.is_empty());
}

#[test]
fn empty_trace_is_empty_not_an_error() {
    let events = started(&[]).finish();
    let r = analyze(&events, None, None, &OwaspTable::default()).unwrap();
    assert!(r.rounds.solved.values.is_empty() && r.rounds.dead_end.values.is_empty());
    assert_eq!(r.exits.total, 0);
    assert!(r.series.is_empty());
    assert_eq!(r.tables.performance.avg_rounds, "n/a");
    assert!(analyze(&[], None, None, &OwaspTable::default()).is_ok());
}

#[test]
fn ttff_of_a_flag_at_127_4_seconds() {
    let mut b = started(&[ep(1)]);
    b.advance_ms(127_400);
    b.push(EventBody::FlagSubmitted(FlagSubmitted {
        agent_id: "a".into(),
        entrypoint: ep(1).key(),
        value: "HTB{x}".into(),
        correct: true,
        round: 1,
    }));
    let events = b.finish();
    assert_eq!(ttff(&events), Some(127_400));
    assert_eq!(PerformanceRow::of(&run_summary(&events, None)).ttff_s, "127.40");
}

#[test]
fn ttff_ignores_wrong_flags() {
    let mut b = started(&[ep(1)]);
    let mut a = agent(3, ExitReason::GiveUp);
    a.flags.push(("nope".into(), false));
    chain(&mut b, 1, Outcome::DeadEnd, vec![a]);
    assert_eq!(ttff(&b.finish()), None);
}

#[test]
fn equal_means_give_unit_ratio() {
    assert_eq!(ratio_label(Frac::int(7).div(Frac::int(7))), "1.0×");
    assert_eq!(ratio_label(None), "n/a");
}

#[test]
fn exit_fractions() {
    let mut b = started(&[ep(1)]);
    chain(&mut b, 1, Outcome::BudgetExhausted, vec![agent(9, ExitReason::BudgetExhausted); 3]);
    let x = exit_breakdown(&b.finish());
    assert_eq!(x.fractions.len(), 1);
    assert_eq!(x.fractions[&ExitReason::BudgetExhausted], Frac::int(1));

    let mut b = started(&[ep(1)]);
    chain(&mut b, 1, Outcome::Solved, vec![agent(4, ExitReason::Solved)]);
    let x = exit_breakdown(&b.finish());
    assert_eq!((x.total, x.fractions[&ExitReason::Solved]), (1, Frac::int(1)));
}

#[test]
fn zero_findings_signal() {
    let mut b = started(&[ep(1), ep(2)]);
    chain(&mut b, 1, Outcome::Solved, vec![agent(4, ExitReason::Solved)]);
    chain(&mut b, 2, Outcome::DeadEnd, vec![agent(4, ExitReason::GiveUp)]);
    let row = SignalRow::of("m", &discovery_signal(&b.finish()));
    assert_eq!(
        [&row.findings_per_entrypoint, &row.solved, &row.dead_end, &row.signal_rate].map(|s| s.as_str()),
        ["0.00", "0.00", "0.00", "0.0%"]
    );
}

#[test]
fn severity_one_of_each() {
    let mut b = started(&[ep(1)]);
    let mut a = agent(4, ExitReason::GiveUp);
    a.findings = Severity::ALL.iter().map(|s| (*s, "t".to_string())).collect();
    chain(&mut b, 1, Outcome::DeadEnd, vec![a]);
    let events = b.finish();
    assert_eq!(severity_histogram(recorded_findings(&events)).counts, [1; 5]);
    assert_eq!(severity_histogram(Vec::new()).counts, [0; 5]);
}

#[test]
fn one_agent_one_entrypoint_has_unit_inflation() {
    let mut b = started(&[ep(1)]);
    chain(&mut b, 1, Outcome::Solved, vec![agent(4, ExitReason::Solved)]);
    let e = escalation(&b.finish());
    assert_eq!((e.inflation, e.avg_agents_solved, e.avg_agents_dead_end), (Some(Frac::int(1)), Some(Frac::int(1)), None));
}

#[test]
fn evidence_counts_distinct_files() {
    let mut b = started(&[ep(1)]);
    chain(&mut b, 1, Outcome::DeadEnd, vec![agent(4, ExitReason::GiveUp)]);
    assert_eq!(evidence_summary(&b.finish()), EvidenceSummary { agents_with_evidence: 0, total_files: 0 });

    let mut b = started(&[ep(1)]);
    let mut a = agent(4, ExitReason::GiveUp);
    a.evidence = ["a.txt", "b.txt", "c.txt", "a.txt"].map(String::from).to_vec();
    chain(&mut b, 1, Outcome::DeadEnd, vec![a]);
    assert_eq!(evidence_summary(&b.finish()), EvidenceSummary { agents_with_evidence: 1, total_files: 3 });
}

fn oracle() -> MilestoneOracle {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    MilestoneOracle::load(&root.join("config/milestones_ftp_http.json")).unwrap()
}

#[test]
fn discovery_only_trace_is_partial_on_first_milestones() {
    let ftp = EntryPoint::new("10.0.0.9", 21, ServiceKind::Ftp);
    let http = EntryPoint::new("10.0.0.9", 80, ServiceKind::Http);
    let mut b = started(&[ftp.clone(), http.clone()]);
    for e in [ftp, http] {
        b.push(EventBody::EntryPointDiscovered(EntryPointDiscovered { entrypoint: e }));
    }
    let m = milestone_alignment(&b.finish(), &oracle()).unwrap();
    assert_eq!(m.symbols(), "◐ ✗ ✗ ✗ | ◐ ✗ ✗ ✗");
}

#[test]
fn bad_predicates_are_named() {
    let wrap = |pred: &str| {
        format!(r#"{{"name":"o","groups":[{{"name":"G","port":1,"milestones":[{{"id":"M","name":"m","aligned":{pred}}}]}}]}}"#)
    };
    for (pred, needle) in [
        (r#"{"event":"ToolExec","fields":{"nonsense":{"contains":"x"}}}"#, "nonsense"),
        (r#"{"event":"ToolExec","fields":{"output":{"regex":"("}}}"#, "regex"),
        (r#"{"all":[]}"#, "empty"),
    ] {
        match MilestoneOracle::from_json(&wrap(pred)) {
            Err(PredicateError::Invalid { predicate, reason }) => {
                assert_eq!(predicate, "G/M/aligned");
                assert!(reason.contains(needle), "{reason}");
            }
            other => panic!("{pred}: {other:?}"),
        }
    }
    assert!(matches!(
        MilestoneOracle::from_json(&wrap(r#"{"event":"NoSuchEvent"}"#)),
        Err(PredicateError::Load { .. })
    ));
}
