//! Orchestrator invariants over randomized chains.

mod support {
    pub mod chains;
}

use std::collections::BTreeMap;

use explorer_core::domain::Outcome;
use support::chains::{check, random_run};

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn random_chains_hold_every_invariant() {
    let mut chains = 0;
    let mut outcomes: BTreeMap<String, usize> = BTreeMap::new();
    let mut critics = 0;
    let mut extensions = 0;
    for seed in 0..120 {
        let run = random_run(seed).await;
        let bad = check(&run);
        assert!(bad.is_empty(), "seed {seed}: {bad:#?}");
        chains += run.results.len();
        for r in &run.results {
            *outcomes.entry(format!("{:?}", r.outcome)).or_default() += 1;
        }
        critics += run.events.iter().filter(|e| matches!(e.body, explorer_core::trace::EventBody::CriticInterjection(_))).count();
        extensions += run.events.iter().filter(|e| matches!(e.body, explorer_core::trace::EventBody::BudgetExtended(_))).count();
    }
    assert!(chains >= 300, "{chains} chains");
    for o in [Outcome::Solved, Outcome::DeadEnd, Outcome::MaxAgentsReached] {
        assert!(outcomes.get(&format!("{o:?}")).copied().unwrap_or(0) > 0, "no {o:?} in {outcomes:?}");
    }
    eprintln!("{chains} chains: {outcomes:?}, {critics} critic notes, {extensions} extensions");
    assert!(critics > 0 && extensions > 0, "critics {critics}, extensions {extensions}");
}

#[tokio::test]
async fn a_seed_replays_to_the_same_trace() {
    let a = random_run(7).await;
    let b = random_run(7).await;
    let strip = |r: &support::chains::ChainRun| {
        r.results.iter().map(|x| (x.outcome, x.agents.len(), x.total_rounds, x.total_cost)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[tokio::test]
async fn the_checker_rejects_doctored_runs() {
    use explorer_core::trace::EventBody;
    use explorer_core::Usd;
    let clean = random_run(3).await;
    assert!(check(&clean).is_empty());

    let mut run = random_run(3).await;
    run.config.team_size = 0;
    assert!(check(&run).iter().any(|m| m.contains("team size")));

    let mut run = random_run(3).await;
    run.config.parallel_subgraphs = 0;
    assert!(check(&run).iter().any(|m| m.contains("subgraphs open")));

    let mut run = random_run(3).await;
    let a = run.results.iter_mut().flat_map(|r| r.agents.iter_mut()).next().unwrap();
    a.cost += Usd::from_micros(1);
    assert!(check(&run).iter().any(|m| m.contains("calls total")));

    let mut seed = 0;
    let mut run = loop {
        let run = random_run(seed).await;
        if run.events.iter().any(|e| matches!(e.body, EventBody::CriticInterjection(_))) {
            break run;
        }
        seed += 1;
    };
    run.config.critic_after_failures = 99;
    assert!(check(&run).iter().any(|m| m.contains("critic after")));
}
