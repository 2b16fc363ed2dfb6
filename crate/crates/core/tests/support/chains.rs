//! Randomized chain runs and the state-machine property checker.
//!
//! `Chaos` is a scripted backend whose every reply is drawn from a seeded
//! RNG keyed by the call context, so a run is reproducible from its seed.
//! `check` reads the trace and results of a run and lists every violated
//! invariant.

#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use async_trait::async_trait;
use chrono::{Duration, TimeZone, Utc};
use explorer_core::config::RunConfig;
use explorer_core::domain::{
    Caller, EntryPoint, ExitReason, GroundTruth, GroundTruthEntry, Outcome, ServiceKind, SubgraphResult,
};
use explorer_core::gateway::{BackendError, ChatBackend, ChatRequest, ChatResponse, FinishKind, Message, ToolCall, Usage};
use explorer_core::orchestrator::Engine;
use explorer_core::prompts::Prompts;
use explorer_core::sandbox::mock::MockSandbox;
use explorer_core::trace::{spawn_writer, EventBody, StepClock, TraceEvent};
use explorer_core::Usd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Randomized scripted backend.
pub struct Chaos {
    pub seed: u64,
    /// Chance that an agent turn submits the correct flag.
    pub skill: f64,
    /// Largest token count of one reply.
    pub max_tokens: u64,
    pub flags: HashMap<String, String>,
}

fn rng_for(seed: u64, req: &ChatRequest) -> ChaCha8Rng {
    let c = &req.context;
    let mut h = DefaultHasher::new();
    (seed, c.caller.as_str(), &c.agent_id, c.round, c.extensions, req.messages.len()).hash(&mut h);
    if let Some(ep) = &c.entrypoint {
        ep.key().hash(&mut h);
    }
    ChaCha8Rng::seed_from_u64(h.finish())
}

fn call(name: &str, arguments: serde_json::Value) -> Message {
    let mut m = Message::assistant("");
    m.tool_calls.push(ToolCall { id: "c0".into(), name: name.into(), arguments });
    m
}

impl Chaos {
    fn agent_turn(&self, rng: &mut ChaCha8Rng, req: &ChatRequest) -> Message {
        let ep = req.context.entrypoint.as_ref().map(|e| e.key()).unwrap_or_default();
        if rng.random_bool(self.skill) {
            let flag = self.flags.get(&ep).cloned().unwrap_or_default();
            return call("submit_flag", json!({ "flag": flag }));
        }
        match rng.random_range(0..100) {
            0..=49 => call("shell_exec", json!({ "command": "echo probe" })),
            50..=59 => call("http_request", json!({ "url": format!("http://{ep}/") })),
            60..=67 => call("write_file", json!({ "path": format!("notes/n{}.md", rng.random_range(0..3)), "content": "x" })),
            68..=74 => call("submit_flag", json!({ "flag": "FLAG{guess}" })),
            75..=84 => call("finish", json!({ "summary": "done", "handoff": true })),
            85..=89 => call("finish", json!({ "summary": "nothing here", "handoff": false })),
            90..=93 => Message::assistant("I think I am finished."),
            _ => call("shell_exec", json!({ "bogus": 1 })),
        }
    }

    fn findings(&self, rng: &mut ChaCha8Rng) -> String {
        if rng.random_bool(0.1) {
            return "no json here".into();
        }
        let labels = ["critical", "High", "MEDIUM", "low", "info", "informational", "weird"];
        let n = rng.random_range(0..3);
        let items: Vec<_> = (0..n)
            .map(|i| {
                // info-heavy, so dead ends are common
                let s = if rng.random_bool(0.7) { labels[rng.random_range(3..7)] } else { labels[rng.random_range(0..3)] };
                json!({ "title": format!("finding {i}"), "description": "d", "severity": s, "confidence": rng.random::<f64>() })
            })
            .collect();
        serde_json::to_string(&items).unwrap()
    }
}

#[async_trait]
impl ChatBackend for Chaos {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut rng = rng_for(self.seed, req);
        let message = match req.context.caller {
            Caller::Agent => self.agent_turn(&mut rng, req),
            Caller::Decision => Message::assistant(["EXTEND", "EXTEND", "HANDOFF", "GIVEUP", "unsure"][rng.random_range(0..5)]),
            Caller::Supervisor => Message::assistant(if rng.random_bool(0.8) {
                json!({
                    "hypothesis": "try the login form",
                    "rationale": "r",
                    "confidence": rng.random::<f64>(),
                    "suggested_techniques": ["sqli"],
                    "exploratory": rng.random_bool(0.3),
                })
                .to_string()
            } else {
                "garbage".into()
            }),
            Caller::Critic => Message::assistant(if rng.random_bool(0.9) { "STUCK: pivot" } else { "" }),
            Caller::Extractor => Message::assistant(self.findings(&mut rng)),
        };
        let finish_kind = if message.tool_calls.is_empty() { FinishKind::Stop } else { FinishKind::ToolCalls };
        let usage = Usage {
            input_tokens: rng.random_range(1_000..=self.max_tokens),
            output_tokens: rng.random_range(0..=self.max_tokens / 10),
        };
        Ok(ChatResponse { message, usage, finish_kind })
    }

    fn describe(&self) -> String {
        format!("chaos:{}", self.seed)
    }
}

pub struct ChainRun {
    pub config: RunConfig,
    pub results: Vec<SubgraphResult>,
    pub events: Vec<TraceEvent>,
}

/// Draws a configuration and an entrypoint set from `seed` and runs them.
pub async fn random_run(seed: u64) -> ChainRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = RunConfig::default();
    config.parallel_subgraphs = rng.random_range(1..=4);
    config.team_size = rng.random_range(1..=10);
    config.base_budget = Usd::from_micros([150_000, 300_000, 1_000_000][rng.random_range(0..3)]);
    config.max_extensions = rng.random_range(0..=4);
    config.critic_after_failures = rng.random_range(1..=4);
    config.dead_end_attempts = rng.random_range(1..=4);
    config.reflection_thresholds = if rng.random_bool(0.5) { vec![0.5, 0.8] } else { vec![0.3, 0.6, 0.9] };
    let n = rng.random_range(1..=8u16);
    let eps: Vec<EntryPoint> = (0..n).map(|i| EntryPoint::new("10.0.0.1", 8000 + i, ServiceKind::Http)).collect();
    let entries = eps
        .iter()
        .map(|e| GroundTruthEntry {
            host: e.host.clone(),
            port: e.port,
            flag: format!("FLAG{{{seed}_{}}}", e.port),
            challenge_name: format!("c{}", e.port),
        })
        .collect();
    let truth = GroundTruth::new(entries).unwrap();
    let chaos = Chaos {
        seed,
        skill: rng.random_range(0.0..0.08),
        max_tokens: [40_000, 120_000][rng.random_range(0..2)],
        flags: truth.entries.iter().map(|e| (format!("{}:{}", e.host, e.port), e.flag.clone())).collect(),
    };
    let clock = Arc::new(StepClock::new(Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(), Duration::milliseconds(250)));
    let trace = spawn_writer(None, clock.clone());
    let gateway = explorer_core::gateway::Gateway::new(Arc::new(chaos), &config, trace.clone());
    let dir = tempfile::tempdir().unwrap();
    let engine = Arc::new(Engine::new(
        format!("chaos-{seed}"),
        config.clone(),
        gateway,
        Arc::new(MockSandbox::new(None)),
        truth,
        Prompts::default(),
        dir.path().to_path_buf(),
        clock,
    ));
    let results = engine.run(&eps).await;
    let events = trace.finish().await.unwrap();
    ChainRun { config, results, events }
}

/// Every invariant violation in one run, as readable strings.
pub fn check(run: &ChainRun) -> Vec<String> {
    let c = &run.config;
    let mut bad = Vec::new();
    let cap = |ext: u32| c.base_budget * i64::from(1 + ext);

    // agent-caller calls per agent: (count, largest cost)
    let mut calls: HashMap<String, (u32, Usd, Usd)> = HashMap::new();
    let mut open = 0u32;
    let mut exits: BTreeMap<String, Vec<ExitReason>> = BTreeMap::new();
    for e in &run.events {
        match &e.body {
            EventBody::SubgraphStarted(_) => {
                open += 1;
                if open > c.parallel_subgraphs {
                    bad.push(format!("seq {}: {open} subgraphs open with n = {}", e.seq, c.parallel_subgraphs));
                }
            }
            EventBody::SubgraphEnded(_) => open -= 1,
            EventBody::ModelCall(m) if m.caller == Caller::Agent => {
                let slot = calls.entry(m.agent_id.clone().unwrap_or_default()).or_insert((0, Usd::ZERO, Usd::ZERO));
                slot.0 += 1;
                slot.1 = slot.1.max(m.cost);
                slot.2 += m.cost;
            }
            EventBody::BudgetExtended(b) => {
                if b.extensions > c.max_extensions || b.extensions > 4 {
                    bad.push(format!("{}: extension {} over the limit", b.agent_id, b.extensions));
                }
                if b.new_cap != cap(b.extensions) {
                    bad.push(format!("{}: cap {} after {} extensions", b.agent_id, b.new_cap, b.extensions));
                }
            }
            EventBody::Reflection(r) => {
                if r.cap != cap(r.epoch) {
                    bad.push(format!("{}: reflection cap {} in epoch {}", r.agent_id, r.cap, r.epoch));
                }
            }
            EventBody::CriticInterjection(x) => {
                let failures = exits
                    .get(&x.entrypoint)
                    .map(|v| v.iter().rev().take_while(|r| **r != ExitReason::Solved).count())
                    .unwrap_or(0) as u32;
                if failures < c.critic_after_failures {
                    bad.push(format!("{}: critic after {failures} failed agents", x.agent_id));
                }
            }
            EventBody::AgentExited(x) => exits.entry(x.entrypoint.clone()).or_default().push(x.exit_reason),
            _ => {}
        }
    }
    if open != 0 {
        bad.push(format!("{open} subgraphs never ended"));
    }

    for r in &run.results {
        let key = r.entrypoint.key();
        if r.agents.len() as u32 > c.team_size {
            bad.push(format!("{key}: {} agents with team size {}", r.agents.len(), c.team_size));
        }
        if r.outcome == Outcome::DeadEnd {
            let early = r.agents.iter().take(c.dead_end_attempts as usize);
            if early.flat_map(|a| &a.findings).any(|f| f.severity >= c.dead_end_min_severity) {
                bad.push(format!("{key}: dead end despite a {} finding", c.dead_end_min_severity));
            }
            if (r.agents.len() as u32) < c.dead_end_attempts {
                bad.push(format!("{key}: dead end after only {} agents", r.agents.len()));
            }
        }
        if r.outcome.is_solved() != r.agents.last().is_some_and(|a| a.exit_reason == ExitReason::Solved) {
            bad.push(format!("{key}: outcome {:?} disagrees with the last exit", r.outcome));
        }
        for a in &r.agents {
            let (n, max_call, total) = calls.get(&a.agent_id).copied().unwrap_or((0, Usd::ZERO, Usd::ZERO));
            if a.rounds != n {
                bad.push(format!("{}: {} rounds but {n} model calls", a.agent_id, a.rounds));
            }
            if a.cost != total {
                bad.push(format!("{}: cost {} but calls total {total}", a.agent_id, a.cost));
            }
            if a.extensions_granted > c.max_extensions {
                bad.push(format!("{}: {} extensions", a.agent_id, a.extensions_granted));
            }
            let limit = cap(a.extensions_granted);
            if a.cost > limit && a.cost - limit > max_call {
                bad.push(format!("{}: spent {} against cap {limit}, largest call {max_call}", a.agent_id, a.cost));
            }
        }
    }
    bad
}
