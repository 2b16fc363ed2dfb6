use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::config::RunConfig;
use crate::domain::{
    AgentRecord, Caller, Directive, EntryPoint, ExitReason, Fate, FlagSubmission, GroundTruth,
};
use crate::gateway::{CallContext, Gateway, Message};
use crate::orchestrator::chain::ChainState;
use crate::orchestrator::critic::{maybe_interject_critic, CriticInput};
use crate::orchestrator::fate::{decide_fate, FateInput};
use crate::orchestrator::record::{render_entries, RecordEntry};
use crate::prompts::{render, Prompts};
use crate::sandbox::{resolve_within, Sandbox, SandboxHandle};
use crate::tools::{parse_call, schemas, ToolInvocation};
use crate::trace::{
    AgentExited, BudgetExtended, Clock, EventBody, EvidenceWritten, FlagSubmitted, Reflection,
    ToolExec,
};

use super::ledger::BudgetLedger;

/// Identity and inputs of one agent.
pub struct AgentSpec<'a> {
    pub agent_id: String,
    pub team_index: u32,
    pub entrypoint: &'a EntryPoint,
    pub directive: Option<&'a Directive>,
    /// Exploration record of earlier agents on this entrypoint.
    pub history: &'a [RecordEntry],
    pub chain: &'a ChainState,
    /// Host directory for evidence files.
    pub agent_dir: PathBuf,
    /// `agent_dir` relative to the run workspace, `/`-separated.
    pub agent_rel: String,
}

/// Shared services an agent runs against.
pub struct AgentEnv<'a> {
    pub config: &'a RunConfig,
    pub gateway: &'a Gateway,
    pub sandbox: &'a dyn Sandbox,
    pub handle: &'a SandboxHandle,
    pub prompts: &'a Prompts,
    pub manifest: &'a GroundTruth,
    pub clock: Arc<dyn Clock>,
}

#[derive(Debug, Clone)]
pub struct AgentOutcome {
    /// Findings are empty here; extraction fills them in.
    pub record: AgentRecord,
    pub submissions: Vec<FlagSubmission>,
    /// This agent's own trace events, in emission order (model calls aside).
    pub events: Vec<EventBody>,
    /// Relative paths of evidence files written.
    pub evidence: Vec<String>,
    pub summary: Option<String>,
    pub fate: Option<Fate>,
}

/// Appends one reflection prompt for `threshold` and emits the event.
pub fn inject_reflection(
    conversation: &mut Vec<Message>,
    ledger: &BudgetLedger,
    threshold: f64,
    prompts: &Prompts,
) -> Reflection {
    conversation.push(Message::user(render(
        &prompts.reflection,
        &[
            ("percent", &format!("{:.0}", threshold * 100.0)),
            ("spent", &ledger.spent.to_string()),
            ("cap", &ledger.cap.to_string()),
        ],
    )));
    Reflection {
        agent_id: String::new(),
        entrypoint: String::new(),
        threshold,
        spent: ledger.spent,
        cap: ledger.cap,
        epoch: ledger.epoch(),
    }
}

struct Live<'a, 'b> {
    spec: &'b AgentSpec<'a>,
    env: &'b AgentEnv<'a>,
    key: String,
    messages: Vec<Message>,
    ledger: BudgetLedger,
    rounds: u32,
    events: Vec<EventBody>,
    evidence: Vec<String>,
    submissions: Vec<FlagSubmission>,
    reflection_notes: Vec<String>,
    critic_notes: Vec<String>,
    failed_approaches: Vec<String>,
    summary: Option<String>,
    solved: bool,
}

impl Live<'_, '_> {
    fn emit(&mut self, body: EventBody) {
        self.env.gateway.trace().emit(body.clone());
        self.events.push(body);
    }

    fn exec_timeout(&self, requested: Option<u64>) -> Duration {
        let cap = self.env.config.sandbox.exec_timeout_secs.max(1);
        Duration::from_secs(requested.unwrap_or(cap).clamp(1, cap))
    }

    /// Runs one tool call and returns the observation, or a fatal error.
    async fn dispatch(&mut self, inv: ToolInvocation, finish: &mut Option<(bool, Option<String>)>) -> Result<String, String> {
        let round = self.rounds - 1;
        let (tool, command, timeout) = match &inv {
            ToolInvocation::ShellExec(a) => ("shell_exec", a.command.clone(), self.exec_timeout(a.timeout_secs)),
            ToolInvocation::HttpRequest(a) => ("http_request", a.to_curl(), self.exec_timeout(None)),
            ToolInvocation::WriteFile(a) => {
                let started = Instant::now();
                let (code, msg) = match resolve_within(&self.spec.agent_dir, &a.path) {
                    Ok(path) => {
                        let written = match path.parent() {
                            Some(p) => std::fs::create_dir_all(p).and_then(|_| std::fs::write(&path, &a.content)),
                            None => std::fs::write(&path, &a.content),
                        };
                        match written {
                            Ok(()) => {
                                let rel = format!("{}/{}", self.spec.agent_rel, a.path.trim_start_matches("./"));
                                self.evidence.push(rel.clone());
                                self.emit(EventBody::EvidenceWritten(EvidenceWritten {
                                    agent_id: self.spec.agent_id.clone(),
                                    entrypoint: self.key.clone(),
                                    path: rel,
                                    bytes: a.content.len() as u64,
                                }));
                                (0, format!("wrote {} bytes to {}", a.content.len(), a.path))
                            }
                            Err(e) => (1, format!("write failed: {e}")),
                        }
                    }
                    Err(e) => (1, format!("rejected path: {e}")),
                };
                self.emit_exec("write_file", a.path.clone(), code, msg.clone(), false, started.elapsed(), round);
                return Ok(msg);
            }
            ToolInvocation::SubmitFlag(a) => {
                let value = a.flag.trim().to_string();
                if self.solved && self.submissions.iter().any(|s| s.correct && s.value == value) {
                    return Ok("flag already accepted".into());
                }
                let correct = crate::domain::check_flag(&value, self.spec.entrypoint, self.env.manifest);
                self.submissions.push(FlagSubmission {
                    agent_id: self.spec.agent_id.clone(),
                    entrypoint: self.spec.entrypoint.clone(),
                    value: value.clone(),
                    correct,
                    wall_clock: self.env.clock.now(),
                    round_index: round,
                });
                self.emit(EventBody::FlagSubmitted(FlagSubmitted {
                    agent_id: self.spec.agent_id.clone(),
                    entrypoint: self.key.clone(),
                    value,
                    correct,
                    round,
                }));
                self.solved |= correct;
                return Ok(serde_json::json!({ "correct": correct }).to_string());
            }
            ToolInvocation::Finish(a) => {
                self.failed_approaches.extend(a.failed_approaches.iter().cloned());
                *finish = Some((a.handoff, a.summary.clone()));
                return Ok("session closed".into());
            }
        };
        match self.env.sandbox.exec(self.env.handle, &command, timeout).await {
            Ok(r) => {
                let output = r.combined();
                let truncated = r.stdout_truncated || r.stderr_truncated;
                self.emit_exec(tool, command, r.exit_code, output.clone(), truncated, r.duration, round);
                Ok(if r.exit_code == 0 {
                    output
                } else {
                    format!("{output}\n[exit code {}]", r.exit_code)
                })
            }
            Err(e) => Err(format!("sandbox: {e}")),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_exec(&mut self, tool: &str, command: String, exit_code: i64, output: String, truncated: bool, d: Duration, round: u32) {
        self.emit(EventBody::ToolExec(ToolExec {
            agent_id: self.spec.agent_id.clone(),
            entrypoint: self.key.clone(),
            round,
            tool: tool.into(),
            command,
            exit_code,
            output,
            truncated,
            duration_ms: d.as_millis() as u64,
        }));
    }
}

fn task_prompt(spec: &AgentSpec<'_>, prompts: &Prompts) -> String {
    let directive = spec
        .directive
        .map(|d| {
            render(
                &prompts.directive,
                &[
                    ("confidence", &format!("{:.2}", d.confidence)),
                    ("hypothesis", &d.hypothesis),
                    ("rationale", &d.rationale),
                    ("techniques", &d.suggested_techniques.join(", ")),
                ],
            )
        })
        .unwrap_or_default();
    let history = if spec.history.is_empty() {
        String::new()
    } else {
        render(&prompts.history, &[("entries", &render_entries(spec.history))])
    };
    render(
        &prompts.task,
        &[
            ("target", &spec.entrypoint.key()),
            ("directive", &directive),
            ("history", &history),
        ],
    )
}

/// Runs one agent until it solves, finishes, gives up, or its fate is
/// decided at the budget cap.
pub async fn run_agent(spec: &AgentSpec<'_>, env: &AgentEnv<'_>) -> AgentOutcome {
    let ep = spec.entrypoint;
    let system = render(
        &env.prompts.system,
        &[
            ("target", &ep.key()),
            ("service", &ep.service_kind.to_string()),
            ("banner", ep.banner.as_deref().unwrap_or("(none)")),
        ],
    );
    let mut live = Live {
        spec,
        env,
        key: ep.key(),
        messages: vec![Message::system(system), Message::user(task_prompt(spec, env.prompts))],
        ledger: BudgetLedger::new(env.config.base_budget, &env.config.reflection_thresholds),
        rounds: 0,
        events: Vec::new(),
        evidence: Vec::new(),
        submissions: Vec::new(),
        reflection_notes: Vec::new(),
        critic_notes: Vec::new(),
        failed_approaches: Vec::new(),
        summary: None,
        solved: false,
    };
    let mut fate = None;
    let mut error = None;
    let mut awaiting_reflection = false;
    let exit = loop {
        if env.config.max_rounds.is_some_and(|m| live.rounds >= m) {
            break ExitReason::BudgetExhausted;
        }
        if live.ledger.at_cap() {
            let reflection = live.reflection_notes.last().cloned().unwrap_or_default();
            let decided = decide_fate(
                &FateInput {
                    agent_id: &spec.agent_id,
                    team_index: spec.team_index,
                    entrypoint: ep,
                    ledger: &live.ledger,
                    max_extensions: env.config.max_extensions,
                    reflection: &reflection,
                },
                env.gateway,
                env.prompts,
            )
            .await;
            match decided {
                Fate::Extend => {
                    live.ledger.extend();
                    let ev = BudgetExtended {
                        agent_id: spec.agent_id.clone(),
                        entrypoint: live.key.clone(),
                        extensions: live.ledger.extensions,
                        new_cap: live.ledger.cap,
                        spent: live.ledger.spent,
                    };
                    live.emit(EventBody::BudgetExtended(ev));
                }
                Fate::HandOff => {
                    fate = Some(Fate::HandOff);
                    break ExitReason::HandOff;
                }
                Fate::GiveUp => {
                    fate = Some(Fate::GiveUp);
                    break ExitReason::GiveUp;
                }
            }
        }

        let mut ctx = CallContext::new(Caller::Agent);
        ctx.agent_id = Some(spec.agent_id.clone());
        ctx.agent_index = Some(spec.team_index);
        ctx.round = Some(live.rounds);
        ctx.extensions = live.ledger.extensions;
        ctx.entrypoint = Some(ep.clone());
        let req = env.gateway.request(live.messages.clone(), schemas(), ctx);
        let completion = match env.gateway.complete(&req).await {
            Ok(c) => c,
            Err(e) => {
                error = Some(e.to_string());
                break ExitReason::Error;
            }
        };
        live.rounds += 1;
        let crossed = live.ledger.charge_cost(completion.cost);
        let reply = completion.response.message;
        let was_reflection = std::mem::take(&mut awaiting_reflection);
        if was_reflection {
            live.reflection_notes.push(reply.content.clone());
        }
        live.messages.push(Message {
            role: crate::gateway::Role::Assistant,
            ..reply.clone()
        });

        let mut finish = None;
        let mut fatal = None;
        for call in &reply.tool_calls {
            let observation = match parse_call(call) {
                Ok(inv) => match live.dispatch(inv, &mut finish).await {
                    Ok(o) => o,
                    Err(e) => {
                        fatal = Some(e);
                        break;
                    }
                },
                Err(e) => {
                    let msg = format!("error: {e}");
                    live.emit_exec(&call.name, call.arguments.to_string(), 2, msg.clone(), false, Duration::ZERO, live.rounds - 1);
                    msg
                }
            };
            live.messages.push(Message::tool(call.id.clone(), observation));
        }
        if let Some(e) = fatal {
            if !live.solved {
                error = Some(e);
                break ExitReason::Error;
            }
        }

        for t in &crossed {
            let mut ev = inject_reflection(&mut live.messages, &live.ledger, *t, env.prompts);
            ev.agent_id = spec.agent_id.clone();
            ev.entrypoint = live.key.clone();
            live.emit(EventBody::Reflection(ev));
            awaiting_reflection = true;
            let interjection = maybe_interject_critic(
                &CriticInput {
                    chain: spec.chain,
                    conversation: &live.messages,
                    agent_id: &spec.agent_id,
                    team_index: spec.team_index,
                    round: live.rounds - 1,
                    extensions: live.ledger.extensions,
                    threshold: *t,
                    after_solve: live.solved,
                },
                env.gateway,
                env.prompts,
            )
            .await;
            if let Some(c) = interjection {
                live.messages.push(Message::critic_note(c.message.clone()));
                live.critic_notes.push(c.message.clone());
                live.events.push(EventBody::CriticInterjection(c));
            }
        }

        if live.solved {
            break ExitReason::Solved;
        }
        if let Some((handoff, summary)) = finish {
            live.summary = summary;
            break if handoff { ExitReason::HandOff } else { ExitReason::GiveUp };
        }
        if reply.tool_calls.is_empty() && !was_reflection {
            // a plain reply with no action ends the session
            live.summary = Some(reply.content.clone()).filter(|s| !s.trim().is_empty());
            break ExitReason::GiveUp;
        }
    };
    let exit = if live.solved { ExitReason::Solved } else { exit };
    let record = AgentRecord {
        agent_id: spec.agent_id.clone(),
        team_index: spec.team_index,
        entrypoint: ep.clone(),
        rounds: live.rounds,
        cost: live.ledger.spent,
        extensions_granted: live.ledger.extensions,
        exit_reason: exit,
        failed_approaches: std::mem::take(&mut live.failed_approaches),
        findings: Vec::new(),
        reflection_notes: std::mem::take(&mut live.reflection_notes),
        critic_notes: std::mem::take(&mut live.critic_notes),
        error: error.clone(),
    };
    live.emit(EventBody::AgentExited(AgentExited {
        agent_id: spec.agent_id.clone(),
        entrypoint: live.key.clone(),
        team_index: spec.team_index,
        exit_reason: exit,
        rounds: record.rounds,
        cost: record.cost,
        extensions: record.extensions_granted,
        fate,
        error,
    }));
    AgentOutcome {
        record,
        submissions: live.submissions,
        events: live.events,
        evidence: live.evidence,
        summary: live.summary,
        fate,
    }
}
