//! The shipped fixture traces reproduce the published table rows.

use std::path::PathBuf;

use explorer_analytics::report::{analyze, AnalysisReport};
use explorer_analytics::synth::{build_fixture, fixture_plans, milestone_fixture, MilestoneProfile};
use explorer_analytics::MilestoneOracle;
use explorer_core::extraction::OwaspTable;
use explorer_core::trace::{read_trace, to_jsonl};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn report(name: &str) -> AnalysisReport {
    let events = read_trace(&root().join("fixtures").join(format!("{name}.jsonl"))).unwrap();
    analyze(&events, None, None, &OwaspTable::default()).unwrap()
}

#[test]
fn shipped_fixtures_match_their_plans() {
    for plan in fixture_plans() {
        let text = std::fs::read_to_string(root().join("fixtures").join(format!("{}.jsonl", plan.name))).unwrap();
        assert_eq!(text, to_jsonl(&build_fixture(&plan)), "{} is stale; rerun gen_fixtures", plan.name);
    }
    for p in MilestoneProfile::ALL {
        let text = std::fs::read_to_string(root().join("fixtures").join(format!("milestones_{}.jsonl", p.name()))).unwrap();
        assert_eq!(text, to_jsonl(&milestone_fixture(p)));
    }
}

/// (fixture, found, correct, wrong, precision, recall, avg rounds, avg cost, agents, avg time)
const PERFORMANCE: &[(&str, u64, u64, u64, &str, &str, &str, &str, u64, &str)] = &[
    ("table2_claude", 10, 9, 1, "90.00%", "22.50%", "47.30", "4.52", 173, "127.40"),
    ("table2_gemini", 11, 9, 2, "81.82%", "22.50%", "72.23", "0.66", 95, "234.67"),
    ("table2_gpt", 10, 6, 4, "60.00%", "15.00%", "101.00", "1.40", 105, "231.76"),
    ("table2_qwen", 17, 3, 14, "17.65%", "7.50%", "674.95", "1.23", 122, "208.08"),
    ("table2_deepseek", 8, 5, 3, "62.50%", "12.50%", "562.78", "1.23", 87, "600.66"),
];

#[test]
fn performance_rows() {
    for (name, found, correct, wrong, p, r, rounds, cost, agents, time) in PERFORMANCE {
        let row = report(name).tables.performance;
        assert_eq!(
            (row.found, row.correct, row.wrong, row.precision.as_str(), row.recall.as_str()),
            (*found, *correct, *wrong, *p, *r),
            "{name}"
        );
        assert_eq!(
            (row.avg_rounds.as_str(), row.avg_cost.as_str(), row.agents, row.avg_time_s.as_str()),
            (*rounds, *cost, *agents, *time),
            "{name}"
        );
    }
}

/// (fixture, solved rounds, dead-end rounds, ratio, solved cost, dead-end cost, ratio)
const PERSISTENCE: &[(&str, &str, &str, &str, &str, &str, &str)] = &[
    ("table2_claude", "18.40", "56.93", "3.1×", "1.78", "5.44", "3.0×"),
    ("table2_gemini", "22.69", "105.25", "4.6×", "0.19", "0.97", "5.1×"),
    ("table2_gpt", "58.82", "152.56", "2.6×", "0.82", "2.10", "2.6×"),
    ("table2_qwen", "296.75", "1053.15", "3.5×", "0.56", "1.91", "3.4×"),
    ("table2_deepseek", "462.43", "1800.33", "3.9×", "1.02", "3.84", "3.8×"),
];

#[test]
fn persistence_rows() {
    for (name, sr, dr, rr, sc, dc, cr) in PERSISTENCE {
        let row = report(name).tables.persistence;
        assert_eq!(
            [&row.solved_rounds, &row.dead_end_rounds, &row.round_ratio, &row.solved_cost, &row.dead_end_cost, &row.cost_ratio]
                .map(|s| s.as_str()),
            [*sr, *dr, *rr, *sc, *dc, *cr],
            "{name}"
        );
    }
}

/// (fixture, findings/entrypoint, solved, dead-end, signal rate)
const SIGNAL: &[(&str, &str, &str, &str, &str)] = &[
    ("table2_claude", "13.40", "5.90", "15.90", "100.0%"),
    ("table2_gemini", "0.42", "0.75", "0.21", "4.2%"),
    ("table2_gpt", "8.80", "5.05", "13.39", "100.0%"),
    ("table2_qwen", "2.50", "2.70", "2.30", "50.0%"),
    ("table2_deepseek", "4.25", "4.14", "5.67", "100.0%"),
];

#[test]
fn signal_rows() {
    for (name, fpe, s, d, rate) in SIGNAL {
        let row = report(name).tables.signal;
        assert_eq!(
            [&row.findings_per_entrypoint, &row.solved, &row.dead_end, &row.signal_rate].map(|s| s.as_str()),
            [*fpe, *s, *d, *rate],
            "{name}"
        );
    }
}

/// (fixture, critical, high, medium, low, info)
const SEVERITY: &[(&str, [u64; 5])] = &[
    ("table2_claude", [24, 128, 205, 22, 157]),
    ("table2_gemini", [9, 4, 1, 0, 3]),
    ("table2_gpt", [18, 25, 84, 25, 200]),
    ("table2_qwen", [27, 27, 6, 2, 38]),
    ("table2_deepseek", [36, 46, 46, 9, 33]),
];

#[test]
fn severity_rows() {
    for (name, counts) in SEVERITY {
        assert_eq!(report(name).tables.severity.counts, *counts, "{name}");
    }
}

/// (fixture, base, team, entrypoints, agents, inflation, solved mean, dead-end mean)
const ESCALATION: &[(&str, &str, &str, u64, u64, &str, &str, &str)] = &[
    ("table8_gpt_015_10", "0.15", "10", 40, 152, "3.800", "1.200", "8.133"),
    ("table2_gpt", "0.30", "7", 40, 105, "2.625", "1.227", "4.333"),
    ("table8_gpt_100_4", "1.00", "4", 40, 92, "2.300", "1.208", "3.938"),
    ("table8_opus_015_10", "0.15", "10", 40, 296, "7.400", "1.700", "9.300"),
    ("table2_claude", "0.30", "7", 40, 173, "4.325", "1.900", "5.133"),
    ("table8_opus_100_4", "1.00", "4", 40, 119, "2.975", "1.600", "3.800"),
];

#[test]
fn escalation_rows() {
    for (name, base, team, eps, agents, infl, s, d) in ESCALATION {
        let row = report(name).tables.escalation;
        assert_eq!(
            (row.base_budget.as_str(), row.team_size.as_str(), row.entrypoints, row.agents),
            (*base, *team, *eps, *agents),
            "{name}"
        );
        assert_eq!(
            [&row.inflation, &row.solved_agents, &row.dead_end_agents].map(|s| s.as_str()),
            [*infl, *s, *d],
            "{name}"
        );
    }
}

/// (fixture, agents/entrypoint, rounds/entrypoint, rounds/agent) to two decimals
const DEPTH: &[(&str, &str, &str, &str)] = &[
    ("table8_gpt_015_10", "3.80", "131.20", "34.53"),
    ("table2_gpt", "2.62", "101.00", "38.48"),
    ("table8_gpt_100_4", "2.30", "113.03", "49.14"),
    ("table8_opus_015_10", "7.40", "53.80", "7.27"),
    ("table2_claude", "4.33", "47.30", "10.94"),
    ("table8_opus_100_4", "2.98", "56.45", "18.97"),
];

#[test]
fn depth_and_continuity() {
    use explorer_analytics::Rounding;
    for (name, a, r, ra) in DEPTH {
        let x = report(name).escalation;
        // this table prints float values (2.625 -> 2.62, 4.325 -> 4.33)
        let f = Rounding::Float;
        assert_eq!(x.inflation.unwrap().render(2, f), *a, "{name}");
        assert_eq!(x.rounds_per_entrypoint.unwrap().render(2, f), *r, "{name}");
        assert_eq!(x.rounds_per_agent.unwrap().render(2, f), *ra, "{name}");
    }
}

#[test]
fn regime_row_for_the_cheapest_gpt_regime() {
    let row = report("table8_gpt_015_10").tables.regime;
    assert_eq!((row.solved, row.dead_end), (25, 15));
    assert_eq!(row.solve_rate, "62.500");
    assert_eq!(row.agents_per_entrypoint, "3.800");
    assert_eq!(row.rounds_per_entrypoint, "131.200");
    assert_eq!(row.cost_per_entrypoint, "1.901");
    let rpc: f64 = row.rounds_per_cost.parse().unwrap();
    assert!((rpc - 69.044).abs() <= 0.1, "rounds per cost {rpc}");
}

/// (fixture, agents with evidence, files)
#[test]
fn evidence_rows() {
    for (name, agents, files) in [
        ("table2_claude", 4, 4),
        ("table2_gemini", 1, 1),
        ("table2_gpt", 8, 9),
        ("table2_qwen", 11, 17),
        ("table2_deepseek", 2, 2),
    ] {
        let e = report(name).evidence;
        assert_eq!((e.agents_with_evidence, e.total_files), (agents, files), "{name}");
    }
}

#[test]
fn gpt_fixture_has_give_up_exits() {
    use explorer_core::domain::ExitReason;
    let r = report("table2_gpt");
    assert!(r.exits.counts.get(&ExitReason::GiveUp).copied().unwrap_or(0) > 0);
}

#[test]
fn milestone_rows() {
    let oracle = MilestoneOracle::load(&root().join("config/milestones_ftp_http.json")).unwrap();
    for (p, row) in [
        (MilestoneProfile::Oracle, "✓ ✓ ✓ ✓ | ✓ ✓ ✓ ✓"),
        (MilestoneProfile::Qwen, "✓ ◐ ✗ ✗ | ✓ ◐ ✗ ✗"),
        (MilestoneProfile::Gpt, "✓ ✗ ✗ ✗ | ✓ ✓ ◐ ◐"),
        (MilestoneProfile::Opus, "✓ ✓ ◐ ◐ | ✓ ✓ ✓ ◐"),
    ] {
        let events = read_trace(&root().join("fixtures").join(format!("milestones_{}.jsonl", p.name()))).unwrap();
        let m = explorer_analytics::milestone_alignment(&events, &oracle).unwrap();
        assert_eq!(m.symbols(), row, "{}", p.name());
    }
}
