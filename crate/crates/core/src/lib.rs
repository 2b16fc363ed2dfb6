//! Engine core: shared types, the trace log, model backends, sandboxes,
//! the agent runtime, the chain orchestrator, finding extraction, and recon.

pub mod config;
pub mod domain;
pub mod extraction;
pub mod gateway;
pub mod money;
pub mod orchestrator;
pub mod prompts;
pub mod recon;
pub mod runtime;
pub mod sandbox;
pub mod tools;
pub mod trace;

pub use money::Usd;
