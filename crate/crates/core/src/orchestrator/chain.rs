//! Per-entrypoint chain bookkeeping: failure streak, critic gate, and the
//! dead-end heuristic.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::domain::{AgentRecord, EntryPoint, ExitReason, Severity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub entrypoint: EntryPoint,
    pub agents_so_far: u32,
    /// Agents in a row that ended without a correct flag.
    pub consecutive_failures: u32,
    pub critic_active: bool,
    pub highest_severity_seen: Option<Severity>,
    /// Agents finished while no finding at or above the dead-end severity
    /// has been seen on this entrypoint. Stops counting once one appears.
    pub attempts_without_signal: u32,
}

impl ChainState {
    pub fn new(entrypoint: EntryPoint) -> Self {
        ChainState {
            entrypoint,
            agents_so_far: 0,
            consecutive_failures: 0,
            critic_active: false,
            highest_severity_seen: None,
            attempts_without_signal: 0,
        }
    }

    pub fn has_signal(&self, min: Severity) -> bool {
        self.highest_severity_seen.is_some_and(|s| s >= min)
    }

    /// Folds a terminated agent (with its extracted findings) into the state.
    pub fn observe(&mut self, agent: &AgentRecord, config: &RunConfig) {
        self.agents_so_far += 1;
        if agent.exit_reason == ExitReason::Solved {
            self.consecutive_failures = 0;
        } else {
            self.consecutive_failures += 1;
        }
        self.critic_active = self.consecutive_failures >= config.critic_after_failures;
        let had_signal = self.has_signal(config.dead_end_min_severity);
        if let Some(top) = agent.findings.iter().map(|f| f.severity).max() {
            self.highest_severity_seen = Some(self.highest_severity_seen.map_or(top, |h| h.max(top)));
        }
        if !had_signal && !self.has_signal(config.dead_end_min_severity) {
            self.attempts_without_signal += 1;
        }
    }

    pub fn is_dead_end(&self, config: &RunConfig) -> bool {
        !self.has_signal(config.dead_end_min_severity)
            && self.attempts_without_signal >= config.dead_end_attempts
    }
}
