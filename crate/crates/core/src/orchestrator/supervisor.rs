//! Supervisor: turns an entrypoint's exploration history into the next
//! agent's directive.

use serde_json::Value;

use crate::domain::{Caller, Directive, EntryPoint};
use crate::gateway::{CallContext, Gateway, Message};
use crate::prompts::{render, Prompts};
use crate::trace::{EventBody, SupervisorDirectiveEvent};

use super::record::{render_entries, RecordEntry};

/// Highest confidence an exploratory (no-finding) directive may carry.
pub const EXPLORATORY_CONFIDENCE_CAP: f64 = 0.3;

/// Pulls the first JSON object out of a reply that may wrap it in prose.
pub fn parse_directive(reply: &str) -> Option<Directive> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    if end < start {
        return None;
    }
    let v: Value = serde_json::from_str(&reply[start..=end]).ok()?;
    let d: Directive = serde_json::from_value(v).ok()?;
    d.validate().ok()?;
    Some(d)
}

/// Returns the directive for agent `next_index` and whether it is the
/// fallback. Emits a `SupervisorDirective` event.
pub async fn supervisor_handoff(
    entrypoint: &EntryPoint,
    history: &[RecordEntry],
    next_index: u32,
    gateway: &Gateway,
    prompts: &Prompts,
) -> (Directive, bool) {
    let prompt = render(
        &prompts.supervisor,
        &[
            ("target", &entrypoint.key()),
            ("service", &entrypoint.service_kind.to_string()),
            ("entries", &render_entries(history)),
        ],
    );
    let mut ctx = CallContext::new(Caller::Supervisor);
    ctx.agent_index = Some(next_index);
    ctx.entrypoint = Some(entrypoint.clone());
    let req = gateway.request(
        vec![Message::system(prompt), Message::user(render_entries(history))],
        Vec::new(),
        ctx,
    );
    let parsed = match gateway.complete(&req).await {
        Ok(c) => {
            let d = parse_directive(&c.response.message.content);
            if d.is_none() {
                tracing::warn!(target = %entrypoint.key(), "supervisor reply unusable, using fallback");
            }
            d
        }
        Err(e) => {
            tracing::warn!(target = %entrypoint.key(), error = %e, "supervisor failed, using fallback");
            None
        }
    };
    let fallback = parsed.is_none();
    let mut directive = parsed.unwrap_or_else(Directive::fallback);
    if !fallback && history.iter().all(|e| e.findings.is_empty()) {
        // nothing observed yet: keep the direction but flag it as a guess
        directive.exploratory = true;
        directive.confidence = directive.confidence.min(EXPLORATORY_CONFIDENCE_CAP);
    }
    gateway
        .trace()
        .emit(EventBody::SupervisorDirective(SupervisorDirectiveEvent {
            entrypoint: entrypoint.key(),
            next_agent_index: next_index,
            directive: directive.clone(),
            fallback,
        }));
    (directive, fallback)
}
