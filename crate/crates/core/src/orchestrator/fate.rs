//! Decision node consulted when an agent reaches its budget cap.

use crate::domain::{Caller, EntryPoint, Fate};
use crate::gateway::{CallContext, Gateway, Message};
use crate::prompts::{render, Prompts};
use crate::runtime::ledger::BudgetLedger;

/// Marker that forces a give-up when it appears in the agent's reflection.
pub const GIVEUP_MARKER: &str = "GIVEUP";

pub struct FateInput<'a> {
    pub agent_id: &'a str,
    pub team_index: u32,
    pub entrypoint: &'a EntryPoint,
    pub ledger: &'a BudgetLedger,
    pub max_extensions: u32,
    pub reflection: &'a str,
}

/// Reads a verdict word from a decision reply; the earliest keyword wins.
pub fn parse_verdict(reply: &str) -> Option<Fate> {
    let up = reply.to_ascii_uppercase();
    [
        ("EXTEND", Fate::Extend),
        ("HANDOFF", Fate::HandOff),
        ("HAND OFF", Fate::HandOff),
        ("GIVEUP", Fate::GiveUp),
        ("GIVE UP", Fate::GiveUp),
    ]
    .into_iter()
    .filter_map(|(k, f)| up.find(k).map(|i| (i, f)))
    .min_by_key(|(i, _)| *i)
    .map(|(_, f)| f)
}

/// Extend only while extensions remain; a backend failure hands off.
pub async fn decide_fate(input: &FateInput<'_>, gateway: &Gateway, prompts: &Prompts) -> Fate {
    if input.ledger.extensions >= input.max_extensions {
        return Fate::HandOff;
    }
    if input.reflection.contains(GIVEUP_MARKER) {
        return Fate::GiveUp;
    }
    let prompt = render(
        &prompts.decision,
        &[
            ("target", &input.entrypoint.key()),
            ("extensions", &input.ledger.extensions.to_string()),
            ("max_extensions", &input.max_extensions.to_string()),
            ("spent", &input.ledger.spent.to_string()),
            ("cap", &input.ledger.cap.to_string()),
            ("reflection", input.reflection),
        ],
    );
    let mut ctx = CallContext::new(Caller::Decision);
    ctx.agent_id = Some(input.agent_id.to_string());
    ctx.agent_index = Some(input.team_index);
    ctx.extensions = input.ledger.extensions;
    ctx.entrypoint = Some(input.entrypoint.clone());
    let req = gateway.request(
        vec![Message::system(prompt), Message::user("Decide now.")],
        Vec::new(),
        ctx,
    );
    match gateway.complete(&req).await {
        Ok(c) => parse_verdict(&c.response.message.content).unwrap_or(Fate::HandOff),
        Err(e) => {
            tracing::warn!(agent = input.agent_id, error = %e, "decision node failed, handing off");
            Fate::HandOff
        }
    }
}
