//! Chain orchestrator.
//!
//! The dispatcher takes entrypoints in batches of `parallel_subgraphs`; each
//! batch runs to completion before the next is dequeued. Inside a subgraph
//! agents run one at a time: spawn, run, extract findings, record, then stop
//! or hand off through the supervisor.

pub mod chain;
pub mod critic;
pub mod fate;
pub mod record;
pub mod supervisor;

use std::path::PathBuf;
use std::sync::Arc;

use tokio::task::JoinSet;

use crate::config::RunConfig;
use crate::domain::{Directive, EntryPoint, ExitReason, GroundTruth, Outcome, SubgraphResult};
use crate::extraction::extract_findings;
use crate::gateway::Gateway;
use crate::money::Usd;
use crate::prompts::Prompts;
use crate::runtime::{run_agent, AgentEnv, AgentSpec};
use crate::sandbox::Sandbox;
use crate::trace::{
    AgentSpawned, Clock, EntryPointDiscovered, EventBody, RunEnded, RunSettings, RunStarted,
    SubgraphEnded, SubgraphStarted,
};

use chain::ChainState;
use record::{GlobalRecord, RecordEntry};
use supervisor::supervisor_handoff;

/// Everything one run needs. Cheap to share behind an `Arc`.
pub struct Engine {
    pub run_id: String,
    pub config: RunConfig,
    pub gateway: Gateway,
    pub sandbox: Arc<dyn Sandbox>,
    pub manifest: Arc<GroundTruth>,
    pub prompts: Arc<Prompts>,
    /// Root of the evidence tree; agent directories live below it.
    pub workspace: PathBuf,
    pub clock: Arc<dyn Clock>,
    pub record: GlobalRecord,
}

impl Engine {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        run_id: impl Into<String>,
        config: RunConfig,
        gateway: Gateway,
        sandbox: Arc<dyn Sandbox>,
        manifest: GroundTruth,
        prompts: Prompts,
        workspace: PathBuf,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Engine {
            run_id: run_id.into(),
            config,
            gateway,
            sandbox,
            manifest: Arc::new(manifest),
            prompts: Arc::new(prompts),
            workspace,
            clock,
            record: GlobalRecord::spawn(),
        }
    }

    pub fn settings(&self) -> RunSettings {
        let c = &self.config;
        RunSettings {
            parallel_subgraphs: c.parallel_subgraphs,
            team_size: c.team_size,
            base_budget: c.base_budget,
            max_extensions: c.max_extensions,
            reflection_thresholds: c.reflection_thresholds.clone(),
            critic_after_failures: c.critic_after_failures,
            dead_end_attempts: c.dead_end_attempts,
            dead_end_min_severity: c.dead_end_min_severity,
        }
    }

    /// Runs every entrypoint and returns one result per entrypoint, in queue
    /// order. Emits the full trace from `RunStarted` to `RunEnded`.
    pub async fn run(self: &Arc<Self>, entrypoints: &[EntryPoint]) -> Vec<SubgraphResult> {
        let trace = self.gateway.trace();
        let mut replay = serde_json::Map::new();
        if let Some(b) = self.gateway.backend().replay_info() {
            replay.insert("backend".into(), b);
        }
        replay.insert(
            "sandbox".into(),
            serde_json::to_value(self.sandbox.kind()).unwrap_or_default(),
        );
        trace.emit(EventBody::RunStarted(RunStarted {
            run_id: self.run_id.clone(),
            model: self.config.model.clone(),
            label: self.config.label.clone(),
            settings: self.settings(),
            total_challenges: self.manifest.challenge_count() as u32,
            challenges: self.manifest.challenge_map(),
            entrypoints: entrypoints.to_vec(),
            replay: Some(serde_json::Value::Object(replay)),
        }));
        for ep in entrypoints {
            trace.emit(EventBody::EntryPointDiscovered(EntryPointDiscovered {
                entrypoint: ep.clone(),
            }));
        }
        let n = self.config.parallel_subgraphs.max(1) as usize;
        let mut results: Vec<SubgraphResult> = Vec::with_capacity(entrypoints.len());
        for (batch, chunk) in entrypoints.chunks(n).enumerate() {
            let mut set = JoinSet::new();
            for (i, ep) in chunk.iter().enumerate() {
                let engine = Arc::clone(self);
                let ep = ep.clone();
                set.spawn(async move { (i, engine.run_subgraph(&ep, batch as u32).await) });
            }
            let mut slot: Vec<Option<SubgraphResult>> = vec![None; chunk.len()];
            while let Some(joined) = set.join_next().await {
                match joined {
                    Ok((i, r)) => slot[i] = Some(r),
                    Err(e) => tracing::error!(error = %e, "subgraph task failed"),
                }
            }
            for (i, r) in slot.into_iter().enumerate() {
                results.push(r.unwrap_or_else(|| self.crashed(&chunk[i])));
            }
        }
        let solved = results.iter().filter(|r| r.outcome.is_solved()).count() as u32;
        trace.emit(EventBody::RunEnded(RunEnded {
            subgraphs: results.len() as u32,
            solved,
        }));
        results
    }

    fn crashed(&self, ep: &EntryPoint) -> SubgraphResult {
        let now = self.clock.now();
        let mut r = SubgraphResult::new(ep.clone(), Outcome::BudgetExhausted, Vec::new(), Vec::new(), now, now);
        r.notes.push("subgraph task panicked".into());
        r
    }

    /// Drives one entrypoint's agent chain to a stop condition.
    pub async fn run_subgraph(&self, ep: &EntryPoint, batch: u32) -> SubgraphResult {
        let trace = self.gateway.trace();
        trace.emit(EventBody::SubgraphStarted(SubgraphStarted {
            entrypoint: ep.clone(),
            batch,
        }));
        let start = self.clock.now();
        let key = ep.key();
        let slug = ep.slug();
        let mut chain = ChainState::new(ep.clone());
        let mut agents = Vec::new();
        let mut submissions = Vec::new();
        let mut notes = Vec::new();
        let mut directive: Option<Directive> = None;

        let outcome = loop {
            let index = agents.len() as u32;
            let agent_id = format!("{slug}-a{index}");
            let agent_rel = format!("{slug}/{agent_id}");
            let agent_dir = self.workspace.join(&slug).join(&agent_id);
            let handle = match self.sandbox.create(&agent_id, &agent_dir).await {
                Ok(h) => h,
                Err(e) => {
                    tracing::error!(target = %key, error = %e, "sandbox unavailable");
                    notes.push(format!("Error: sandbox unavailable: {e}"));
                    break Outcome::BudgetExhausted;
                }
            };
            trace.emit(EventBody::AgentSpawned(AgentSpawned {
                agent_id: agent_id.clone(),
                entrypoint: key.clone(),
                team_index: index,
                sandbox_id: handle.sandbox_id.clone(),
                directive: directive.clone(),
            }));
            let history = self.record.history(&key).await;
            let spec = AgentSpec {
                agent_id: agent_id.clone(),
                team_index: index,
                entrypoint: ep,
                directive: directive.as_ref(),
                history: &history,
                chain: &chain,
                agent_dir,
                agent_rel,
            };
            let env = AgentEnv {
                config: &self.config,
                gateway: &self.gateway,
                sandbox: self.sandbox.as_ref(),
                handle: &handle,
                prompts: &self.prompts,
                manifest: &self.manifest,
                clock: Arc::clone(&self.clock),
            };
            let mut out = run_agent(&spec, &env).await;
            self.sandbox.destroy(&handle).await;
            out.record.findings = extract_findings(
                &out.record,
                &out.events,
                &out.evidence,
                &self.gateway,
                &self.prompts,
            )
            .await;
            self.record
                .append(RecordEntry::from_agent(&out.record, out.summary.as_deref()));
            submissions.extend(out.submissions);
            let solved = out.record.exit_reason == ExitReason::Solved;
            agents.push(out.record);
            if solved {
                break Outcome::Solved;
            }
            chain.observe(agents.last().expect("just pushed"), &self.config);
            if chain.is_dead_end(&self.config) {
                break Outcome::DeadEnd;
            }
            if agents.len() as u32 >= self.config.team_size {
                break Outcome::MaxAgentsReached;
            }
            if let Some(limit) = self.config.entrypoint_budget {
                let spent: Usd = agents.iter().map(|a| a.cost).sum();
                if spent >= limit {
                    break Outcome::BudgetExhausted;
                }
            }
            let history = self.record.history(&key).await;
            let (d, _) = supervisor_handoff(ep, &history, index + 1, &self.gateway, &self.prompts).await;
            directive = Some(d);
        };

        let end = self.clock.now();
        let mut result = SubgraphResult::new(ep.clone(), outcome, agents, submissions, start, end);
        result.notes = notes;
        trace.emit(EventBody::SubgraphEnded(SubgraphEnded {
            entrypoint: ep.clone(),
            outcome,
            agents: result.agents.len() as u32,
            total_rounds: result.total_rounds,
            total_cost: result.total_cost,
        }));
        result
    }
}
