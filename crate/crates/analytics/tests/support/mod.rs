//! Randomized traces and a naive re-derivation of every metric.
//!
//! The oracle never touches the crate's per-entrypoint rollup: it walks raw
//! events once, keys everything by agent exits rather than `SubgraphEnded`,
//! and keeps values as plain `(numerator, denominator)` pairs.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use explorer_analytics::synth::{settings, AgentScript, ChainScript, TraceBuilder};
use explorer_analytics::Frac;
use explorer_core::domain::{EntryPoint, ExitReason, Outcome, ServiceKind, Severity};
use explorer_core::trace::*;
use explorer_core::Usd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXITS: [ExitReason; 5] = [
    ExitReason::Solved,
    ExitReason::HandOff,
    ExitReason::GiveUp,
    ExitReason::BudgetExhausted,
    ExitReason::Error,
];

/// A consistent random trace: 0..=12 entrypoints, 1..=7 agents each.
pub fn random_trace(seed: u64) -> Vec<TraceEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=12usize);
    let eps: Vec<EntryPoint> = (0..n)
        .map(|i| EntryPoint::new("10.1.0.1", 9000 + i as u16, ServiceKind::Http))
        .collect();
    let n_challenges = rng.random_range(1..=6usize);
    let challenges: BTreeMap<String, String> = eps
        .iter()
        .filter_map(|e| {
            let mapped = rng.random_bool(0.8);
            let c = rng.random_range(0..n_challenges);
            mapped.then(|| (e.key(), format!("c{c}")))
        })
        .collect();
    let mut b = TraceBuilder::new(explorer_analytics::synth::epoch());
    b.push(EventBody::RunStarted(RunStarted {
        run_id: format!("rand-{seed}"),
        model: "m".into(),
        label: rng.random_bool(0.5).then(|| "label".to_string()),
        settings: settings(Usd::from_micros(rng.random_range(50_000..2_000_000)), 7),
        total_challenges: (n_challenges + rng.random_range(0..3)) as u32,
        challenges,
        entrypoints: eps.clone(),
        replay: None,
    }));
    for e in &eps {
        b.push(EventBody::EntryPointDiscovered(EntryPointDiscovered { entrypoint: e.clone() }));
    }
    b.advance_ms(rng.random_range(0..5000));
    for (i, ep) in eps.iter().enumerate() {
        let k = rng.random_range(1..=7usize);
        let solved = rng.random_bool(0.4);
        let agents = (0..k)
            .map(|a| {
                let exit = if solved && a + 1 == k { ExitReason::Solved } else { EXITS[rng.random_range(1..5)] };
                let mut s = AgentScript::new(rng.random_range(1..60), Usd::from_micros(rng.random_range(0..3_000_000)), exit);
                s.extensions = rng.random_range(0..=4);
                for _ in 0..rng.random_range(0..4) {
                    s.findings.push((Severity::ALL[rng.random_range(0..5)], format!("f{}", rng.random_range(0..5))));
                }
                for _ in 0..rng.random_range(0..3) {
                    s.flags.push(("HTB{x}".into(), rng.random_bool(0.3)));
                }
                for _ in 0..rng.random_range(0..3) {
                    // repeats are deliberate: rewrites count once
                    s.evidence.push(format!("e{}.txt", rng.random_range(0..3)));
                }
                s
            })
            .collect();
        let outcome = if solved {
            Outcome::Solved
        } else {
            [Outcome::DeadEnd, Outcome::MaxAgentsReached, Outcome::BudgetExhausted][rng.random_range(0..3)]
        };
        b.chain(
            &ChainScript {
                entrypoint: ep.clone(),
                outcome,
                agents,
                duration_ms: rng.random_range(0..400_000),
            },
            (i / 4) as u32,
        );
        b.advance_ms(rng.random_range(0..1000));
    }
    b.push(EventBody::RunEnded(RunEnded {
        subgraphs: n as u32,
        solved: 0,
    }));
    b.finish()
}

/// `(num, den)`; `None` when `den == 0`.
pub type Q = Option<(i128, i128)>;

pub fn q(num: i128, den: i128) -> Q {
    (den != 0).then_some((num, den))
}

pub fn same(f: Option<Frac>, expect: Q) -> bool {
    match (f, expect) {
        (None, None) => true,
        (Some(f), Some((n, d))) => f.num() * d == n * f.den(),
        _ => false,
    }
}

fn qdiv(a: Q, b: Q) -> Q {
    let ((an, ad), (bn, bd)) = (a?, b?);
    q(an * bd, ad * bn)
}

#[derive(Default, Clone)]
struct Ep {
    agents: i128,
    rounds: i128,
    micros: i128,
    findings: i128,
    start: Option<i64>,
    end: Option<i64>,
    solved: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Naive {
    pub found: u64,
    pub correct: u64,
    pub wrong: u64,
    pub precision: Q,
    pub recall: Q,
    pub avg_rounds: Q,
    pub avg_cost: Q,
    pub total_agents: u64,
    pub avg_time_s: Q,
    pub ttff_ms: Option<i64>,
    pub solved_rounds: Vec<u64>,
    pub dead_end_rounds: Vec<u64>,
    pub solved_median: Q,
    pub solved_p90: Option<u64>,
    pub persistence: [Q; 6],
    pub exits: BTreeMap<ExitReason, u64>,
    pub signal: [Q; 4],
    pub severity: [u64; 5],
    pub inflation: Q,
    pub agents_solved: Q,
    pub agents_dead_end: Q,
    pub rounds_per_agent: Q,
    pub rounds_per_cost: Q,
    pub solve_rate: Q,
    pub evidence_agents: u64,
    pub evidence_files: u64,
}

pub fn naive(events: &[TraceEvent]) -> Naive {
    let mut t0 = None;
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut total_challenges = 0i128;
    let mut eps: HashMap<String, Ep> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut flags: HashMap<String, bool> = HashMap::new();
    let mut ttff_ms = None;
    let mut exits = BTreeMap::new();
    let mut severity = [0u64; 5];
    let mut evidence = BTreeSet::new();
    for e in events {
        let ms = e.wall_clock.timestamp_millis();
        match &e.body {
            EventBody::RunStarted(r) => {
                t0.get_or_insert(ms);
                map = r.challenges.clone();
                total_challenges = r.total_challenges as i128;
            }
            EventBody::SubgraphStarted(s) => eps.entry(s.entrypoint.key()).or_default().start = Some(ms),
            EventBody::AgentExited(a) => {
                let ep = eps.entry(a.entrypoint.clone()).or_default();
                ep.agents += 1;
                ep.rounds += a.rounds as i128;
                ep.micros += a.cost.micros() as i128;
                *exits.entry(a.exit_reason).or_insert(0) += 1;
            }
            EventBody::FindingRecorded(f) => {
                eps.entry(f.finding.entrypoint.key()).or_default().findings += 1;
                let idx = match f.finding.severity {
                    Severity::Critical => 0,
                    Severity::High => 1,
                    Severity::Medium => 2,
                    Severity::Low => 3,
                    Severity::Info => 4,
                };
                severity[idx] += 1;
            }
            EventBody::FlagSubmitted(f) => {
                let c = map.get(&f.entrypoint).unwrap_or(&f.entrypoint).clone();
                let v = flags.entry(c).or_insert(false);
                *v = *v || f.correct;
                if f.correct && ttff_ms.is_none() {
                    ttff_ms = t0.map(|t| ms - t);
                }
            }
            EventBody::EvidenceWritten(w) => {
                evidence.insert((w.agent_id.clone(), w.path.clone()));
            }
            EventBody::SubgraphEnded(s) => {
                let ep = eps.entry(s.entrypoint.key()).or_default();
                ep.end = Some(ms);
                ep.solved = Some(s.outcome == Outcome::Solved);
                order.push(s.entrypoint.key());
            }
            _ => {}
        }
    }
    let ended: Vec<&Ep> = order.iter().map(|k| &eps[k]).collect();
    let n = ended.len() as i128;
    let class = |s: bool| ended.iter().filter(|e| e.solved == Some(s)).copied().collect::<Vec<_>>();
    let (sv, dv) = (class(true), class(false));
    let sum = |v: &[&Ep], f: fn(&Ep) -> i128| v.iter().map(|e| f(e)).sum::<i128>();
    let mean_of = |v: &[&Ep], f: fn(&Ep) -> i128| q(sum(v, f), v.len() as i128);
    let cost_of = |v: &[&Ep]| q(sum(v, |e| e.micros), v.len() as i128 * 1_000_000);

    let correct = flags.values().filter(|c| **c).count() as i128;
    let found = flags.len() as i128;
    let mut solved_rounds: Vec<u64> = sv.iter().map(|e| e.rounds as u64).collect();
    let dead_end_rounds: Vec<u64> = dv.iter().map(|e| e.rounds as u64).collect();
    let unsorted_solved = solved_rounds.clone();
    solved_rounds.sort();
    let m = solved_rounds.len();
    let solved_median = if m == 0 {
        None
    } else if m % 2 == 1 {
        q(solved_rounds[m / 2] as i128, 1)
    } else {
        q(solved_rounds[m / 2 - 1] as i128 + solved_rounds[m / 2] as i128, 2)
    };
    // nearest rank: smallest value with at least 90% of the sample at or below it
    let solved_p90 = solved_rounds
        .iter()
        .enumerate()
        .find(|(i, _)| 10 * (i + 1) >= 9 * m)
        .map(|(_, v)| *v);
    let all: Vec<&Ep> = ended.clone();
    let sr = mean_of(&sv, |e| e.rounds);
    let dr = mean_of(&dv, |e| e.rounds);
    let sc = cost_of(&sv);
    let dc = cost_of(&dv);
    let agents = sum(&all, |e| e.agents);
    let rounds = sum(&all, |e| e.rounds);
    Naive {
        found: found as u64,
        correct: correct as u64,
        wrong: (found - correct) as u64,
        precision: q(correct, found),
        recall: q(correct, total_challenges),
        avg_rounds: q(rounds, n),
        avg_cost: cost_of(&all),
        total_agents: agents as u64,
        avg_time_s: q(all.iter().map(|e| (e.end.unwrap() - e.start.unwrap_or(e.end.unwrap())) as i128).sum(), n * 1000),
        ttff_ms,
        solved_rounds: unsorted_solved,
        dead_end_rounds,
        solved_median,
        solved_p90,
        persistence: [sr, dr, qdiv(dr, sr), sc, dc, qdiv(dc, sc)],
        exits,
        signal: [
            mean_of(&all, |e| e.findings),
            mean_of(&sv, |e| e.findings),
            mean_of(&dv, |e| e.findings),
            q(dv.iter().filter(|e| e.findings > 0).count() as i128, dv.len() as i128),
        ],
        severity,
        inflation: q(agents, n),
        agents_solved: mean_of(&sv, |e| e.agents),
        agents_dead_end: mean_of(&dv, |e| e.agents),
        rounds_per_agent: q(rounds, agents),
        rounds_per_cost: qdiv(q(rounds, n), cost_of(&all)),
        solve_rate: q(sv.len() as i128, n),
        evidence_agents: evidence.iter().map(|(a, _)| a).collect::<BTreeSet<_>>().len() as u64,
        evidence_files: evidence.len() as u64,
    }
}

/// Compares every metric of `analyze` against the naive derivation;
/// returns the names of the mismatching ones.
pub fn mismatches(events: &[TraceEvent]) -> Vec<&'static str> {
    use explorer_analytics::metrics::*;
    let o = naive(events);
    let mut bad = Vec::new();
    let mut check = |ok: bool, name: &'static str| {
        if !ok {
            bad.push(name)
        }
    };
    let s = run_summary(events, None);
    check((s.outcomes.found, s.outcomes.correct, s.outcomes.wrong) == (o.found, o.correct, o.wrong), "outcome counts");
    check(same(s.outcomes.precision, o.precision), "precision");
    check(same(s.outcomes.recall, o.recall), "recall");
    check(same(s.avg_rounds, o.avg_rounds), "avg rounds");
    check(same(s.avg_cost, o.avg_cost), "avg cost");
    check(s.total_agents == o.total_agents, "agents");
    check(same(s.avg_time_s, o.avg_time_s), "avg time");
    check(ttff(events) == o.ttff_ms, "ttff");
    let r = round_distributions(events);
    check(r.solved.values == o.solved_rounds && r.dead_end.values == o.dead_end_rounds, "round lists");
    check(same(r.solved.median, o.solved_median), "median");
    check(r.solved.p90 == o.solved_p90, "p90");
    let p = persistence(events);
    let got = [p.solved_rounds, p.dead_end_rounds, p.round_ratio, p.solved_cost, p.dead_end_cost, p.cost_ratio];
    check(got.iter().zip(o.persistence).all(|(g, e)| same(*g, e)), "persistence");
    let x = exit_breakdown(events);
    check(x.counts == o.exits, "exit counts");
    let frac_sum: Option<Frac> = x.fractions.values().try_fold(Frac::int(0), |acc, f| {
        Frac::new(acc.num() * f.den() + f.num() * acc.den(), acc.den() * f.den())
    });
    check(x.total == 0 || frac_sum == Some(Frac::int(1)), "exit fractions sum to one");
    let d = discovery_signal(events);
    let got = [d.findings_per_entrypoint, d.solved_findings, d.dead_end_findings, d.signal_rate];
    check(got.iter().zip(o.signal).all(|(g, e)| same(*g, e)), "signal");
    check(severity_histogram(recorded_findings(events)).counts == o.severity, "severity");
    let e = escalation(events);
    check(same(e.inflation, o.inflation), "inflation");
    check(same(e.avg_agents_solved, o.agents_solved), "agents solved");
    check(same(e.avg_agents_dead_end, o.agents_dead_end), "agents dead end");
    check(same(e.rounds_per_agent, o.rounds_per_agent), "rounds per agent");
    check(same(e.rounds_per_cost, o.rounds_per_cost), "rounds per cost");
    check(same(e.solve_rate, o.solve_rate), "solve rate");
    let ev = evidence_summary(events);
    check((ev.agents_with_evidence, ev.total_files) == (o.evidence_agents, o.evidence_files), "evidence");
    bad
}
