//! Agent runtime: one short-lived agent's turn loop and its budget ledger.

mod agent;
pub mod ledger;

pub use agent::{inject_reflection, run_agent, AgentEnv, AgentOutcome, AgentSpec};
pub use ledger::{charge, BudgetLedger};
