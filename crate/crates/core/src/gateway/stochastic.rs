//! Seeded stochastic agent for regime experiments.
//!
//! Every response is a pure function of the seed and the request routing
//! context, so a run is reproducible while still varying across agents and
//! entrypoints. The agent probes the target over HTTP, recognises the bundled
//! simulated service families from their pages, and with probability `skill`
//! is assigned a round at which it tries the family's known exploit.

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{
    BackendError, ChatBackend, ChatRequest, ChatResponse, FinishKind, Message, Role, ToolCall,
    Usage,
};
use crate::domain::Caller;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    CommandInjection,
    PathTraversal,
    AuthBypass,
    Unknown,
}

impl Family {
    /// Recognises a service family from page markup in observed responses.
    /// Request URLs never contain these markers, only served HTML does.
    pub fn detect(text: &str) -> Family {
        if text.contains("href=\"?format=") {
            Family::CommandInjection
        } else if text.contains("href=\"?file=") {
            Family::PathTraversal
        } else if text.contains("name=\"role\"") {
            Family::AuthBypass
        } else {
            Family::Unknown
        }
    }

    fn exploit_path(self) -> Option<&'static str> {
        match self {
            Family::CommandInjection => Some("/?format=%27%3B/bin/c%3Ft%20/fl*%3B%27"),
            Family::PathTraversal => Some("/?file=../../../flag.txt"),
            Family::AuthBypass => Some("/admin?role=admin"),
            Family::Unknown => None,
        }
    }
}

const PROBES: &[&str] = &[
    "/robots.txt",
    "/admin",
    "/login",
    "/.git/config",
    "/?format=%25Y-%25m-%25d",
    "/?format=%24(id)",
    "/?format=%27%0aid%0a%27",
    "/?file=welcome.txt",
    "/?file=/etc/passwd",
    "/about",
];

#[derive(Debug, Clone)]
pub struct Stochastic {
    pub seed: u64,
    /// Probability that a given agent is assigned a solving round.
    pub skill: f64,
    /// Inclusive token range per agent turn; one token costs one micro-unit
    /// at the scripted price.
    pub tokens_per_round: (u64, u64),
    pub extend_probability: f64,
    pub giveup_probability: f64,
    /// Chance that an agent on an unrecognised (noise) service reports a
    /// plausible but wrong Medium finding.
    pub false_positive_rate: f64,
}

impl Stochastic {
    pub fn new(seed: u64, skill: f64) -> Self {
        Stochastic {
            seed,
            skill,
            tokens_per_round: (20_000, 50_000),
            extend_probability: 0.4,
            giveup_probability: 0.15,
            false_positive_rate: 0.35,
        }
    }

    fn rng(&self, parts: &[&str]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for p in parts {
            h.update(p.as_bytes());
            h.update([0xff]);
        }
        let d = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&d);
        ChaCha8Rng::from_seed(seed)
    }

    fn usage(&self, rng: &mut ChaCha8Rng) -> Usage {
        let (lo, hi) = self.tokens_per_round;
        let total = rng.random_range(lo..=hi);
        let output = total / 5;
        Usage {
            input_tokens: total - output,
            output_tokens: output,
        }
    }

    fn agent_turn(&self, req: &ChatRequest, target: &str, agent: &str) -> ChatResponse {
        let round = req.context.round.unwrap_or(0);
        let mut plan = self.rng(&["plan", target, agent]);
        let solver = plan.random_bool(self.skill);
        let solve_round = plan.random_range(1..=4u32);
        let quit_round = plan.random_range(3..=14u32);
        let mut rng = self.rng(&["turn", target, agent, &round.to_string(), &req.context.extensions.to_string()]);
        let usage = self.usage(&mut rng);
        let conversation: String = req
            .messages
            .iter()
            .filter(|m| m.role == Role::Tool)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let flag_re = Regex::new(r"HTB\{[^}\s]*\}").expect("static regex");
        let submitted = req
            .messages
            .iter()
            .any(|m| m.tool_calls.iter().any(|c| c.name == "submit_flag"));
        let base = format!("http://{target}");
        let call = |name: &str, arguments: Value| ToolCall {
            id: format!("call_{round}_0"),
            name: name.into(),
            arguments,
        };
        let (content, tool) = if round == 0 {
            ("Mapping the service front page.".to_string(), call("http_request", json!({"url": format!("{base}/")})))
        } else if let (Some(m), false) = (flag_re.find(&conversation), submitted) {
            ("Flag observed, submitting.".into(), call("submit_flag", json!({"flag": m.as_str()})))
        } else if solver && round == solve_round {
            let family = Family::detect(&conversation);
            match family.exploit_path() {
                Some(p) => (
                    format!("Trying the {family:?} primitive."),
                    call("http_request", json!({"url": format!("{base}{p}")})),
                ),
                None => probe(&mut rng, &base, round),
            }
        } else if round >= quit_round && !rng.random_bool(0.5) {
            let handoff = !rng.random_bool(self.giveup_probability);
            (
                "No further progress on this path.".into(),
                call(
                    "finish",
                    json!({"summary": "probed front page and common paths", "handoff": handoff,
                           "failed_approaches": ["common path enumeration"]}),
                ),
            )
        } else {
            probe(&mut rng, &base, round)
        };
        ChatResponse {
            message: Message {
                role: Role::Assistant,
                content,
                tool_calls: vec![tool],
                tool_call_id: None,
            },
            usage,
            finish_kind: FinishKind::ToolCalls,
        }
    }

    fn extract(&self, req: &ChatRequest, target: &str, agent: &str) -> Value {
        let mut rng = self.rng(&["extract", target, agent]);
        let log = req.last_content();
        let family = Family::detect(log);
        let mut findings = Vec::new();
        match family {
            Family::Unknown => {
                for _ in 0..rng.random_range(0..=2) {
                    let sev = if rng.random_bool(0.5) { "Info" } else { "Low" };
                    findings.push(json!({
                        "title": "Server banner disclosure",
                        "description": "The server version header is exposed.",
                        "severity": sev,
                        "confidence": 0.6,
                        "endpoints": ["/"],
                    }));
                }
                if rng.random_bool(self.false_positive_rate) {
                    let (title, desc) = FALSE_POSITIVES[rng.random_range(0..FALSE_POSITIVES.len())];
                    findings.push(json!({
                        "title": title, "description": desc, "severity": "Medium",
                        "confidence": 0.4, "endpoints": ["/"],
                    }));
                }
            }
            f => {
                let (title, desc) = match f {
                    Family::CommandInjection => ("Format parameter reaches a shell", "Possible command injection via the format parameter."),
                    Family::PathTraversal => ("File parameter path handling", "Possible path traversal in the file parameter."),
                    _ => ("Client-controlled role", "Broken access control: role is taken from the client."),
                };
                let sev = if rng.random_bool(0.5) { "High" } else { "Medium" };
                findings.push(json!({
                    "title": title, "description": desc, "severity": sev,
                    "confidence": 0.7, "endpoints": ["/"],
                }));
                if rng.random_bool(0.5) {
                    findings.push(json!({
                        "title": "Verbose error output",
                        "description": "Errors reveal implementation detail.",
                        "severity": "Info", "confidence": 0.5, "endpoints": [],
                    }));
                }
            }
        }
        Value::Array(findings)
    }
}

const FALSE_POSITIVES: &[(&str, &str)] = &[
    ("Missing security headers", "No Content-Security-Policy or X-Frame-Options; clickjacking may be possible."),
    ("Query string reflected in page", "Request parameters may be echoed unescaped; possible cross-site scripting."),
    ("Administrative path answers", "The /admin path responds and may expose management functions."),
];

fn probe(rng: &mut ChaCha8Rng, base: &str, round: u32) -> (String, ToolCall) {
    let p = PROBES[rng.random_range(0..PROBES.len())];
    (
        format!("Probing {p}."),
        ToolCall {
            id: format!("call_{round}_0"),
            name: "http_request".into(),
            arguments: json!({"url": format!("{base}{p}")}),
        },
    )
}

#[async_trait]
impl ChatBackend for Stochastic {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let ctx = &req.context;
        let target = ctx.entrypoint.as_ref().map(|e| e.key()).unwrap_or_default();
        let agent = ctx.agent_index.map(|a| a.to_string()).unwrap_or_default();
        let text_reply = |content: String, tokens: u64| ChatResponse {
            message: Message::assistant(content),
            usage: Usage {
                input_tokens: tokens,
                output_tokens: tokens / 10,
            },
            finish_kind: FinishKind::Stop,
        };
        Ok(match ctx.caller {
            Caller::Agent => self.agent_turn(req, &target, &agent),
            Caller::Decision => {
                let mut rng = self.rng(&["fate", &target, &agent, &ctx.extensions.to_string()]);
                let x: f64 = rng.random();
                let verdict = if x < self.extend_probability {
                    "EXTEND"
                } else if x < self.extend_probability + self.giveup_probability {
                    "GIVEUP"
                } else {
                    "HANDOFF"
                };
                text_reply(verdict.into(), 2_000)
            }
            Caller::Supervisor => {
                let mut rng = self.rng(&["supervisor", &target, &agent]);
                let family = Family::detect(req.last_content());
                let confidence = (rng.random_range(20..=80) as f64) / 100.0;
                let d = json!({
                    "hypothesis": format!("pursue {family:?} surface"),
                    "rationale": "derived from prior agents' observations",
                    "confidence": confidence,
                    "suggested_techniques": ["parameter fuzzing"],
                });
                text_reply(d.to_string(), 3_000)
            }
            Caller::Critic => text_reply("STUCK: rotate to an untried technique.".into(), 2_000),
            Caller::Extractor => text_reply(self.extract(req, &target, &agent).to_string(), 3_000),
        })
    }

    fn describe(&self) -> String {
        format!("stochastic:seed={}", self.seed)
    }

    fn replay_info(&self) -> Option<Value> {
        Some(json!({"kind": "stochastic", "seed": self.seed, "skill": self.skill}))
    }
}
