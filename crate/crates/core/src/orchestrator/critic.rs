//! Critic: interjects into a live agent's conversation at reflection points
//! once the chain has failed enough times.

use crate::domain::{Caller, EntryPoint};
use crate::gateway::{CallContext, Gateway, Message, Role};
use crate::prompts::{render, Prompts};
use crate::trace::{CriticInterjection, EventBody};

use super::chain::ChainState;

/// Messages of the live conversation shown to the critic.
const TAIL: usize = 12;
const MAX_MESSAGE_CHARS: usize = 800;

pub struct CriticInput<'a> {
    pub chain: &'a ChainState,
    pub conversation: &'a [Message],
    pub agent_id: &'a str,
    pub team_index: u32,
    pub round: u32,
    pub extensions: u32,
    pub threshold: f64,
    pub after_solve: bool,
}

fn render_tail(conversation: &[Message]) -> String {
    let start = conversation.len().saturating_sub(TAIL);
    conversation[start..]
        .iter()
        .filter(|m| m.role != Role::System)
        .map(|m| {
            let mut body: String = m.content.chars().take(MAX_MESSAGE_CHARS).collect();
            for c in &m.tool_calls {
                body.push_str(&format!("\n[call {} {}]", c.name, c.arguments));
            }
            format!("{}: {}", m.role.wire_name(), body)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Returns the critic message to append, or `None` when the critic is not
/// active or the backend fails.
pub async fn maybe_interject_critic(
    input: &CriticInput<'_>,
    gateway: &Gateway,
    prompts: &Prompts,
) -> Option<CriticInterjection> {
    if !input.chain.critic_active {
        return None;
    }
    let ep: &EntryPoint = &input.chain.entrypoint;
    let prompt = render(
        &prompts.critic,
        &[
            ("target", &ep.key()),
            ("failures", &input.chain.consecutive_failures.to_string()),
            ("percent", &format!("{:.0}", input.threshold * 100.0)),
            ("conversation", &render_tail(input.conversation)),
        ],
    );
    let mut ctx = CallContext::new(Caller::Critic);
    ctx.agent_id = Some(input.agent_id.to_string());
    ctx.agent_index = Some(input.team_index);
    ctx.round = Some(input.round);
    ctx.extensions = input.extensions;
    ctx.entrypoint = Some(ep.clone());
    let req = gateway.request(
        vec![Message::system(prompt), Message::user("Give your verdict and advice.")],
        Vec::new(),
        ctx,
    );
    match gateway.complete(&req).await {
        Ok(c) if !c.response.message.content.trim().is_empty() => {
            let event = CriticInterjection {
                agent_id: input.agent_id.to_string(),
                entrypoint: ep.key(),
                threshold: input.threshold,
                consecutive_failures: input.chain.consecutive_failures,
                message: c.response.message.content,
                after_solve: input.after_solve,
            };
            gateway.trace().emit(EventBody::CriticInterjection(event.clone()));
            Some(event)
        }
        Ok(_) => None,
        Err(e) => {
            tracing::warn!(agent = input.agent_id, error = %e, "critic failed, no interjection");
            None
        }
    }
}
