//! Finding extraction: a separate model pass over a finished agent's log,
//! corpus aggregation, and OWASP Top-10 keyword mapping.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{AgentRecord, Caller, EntryPoint, Finding, Severity, SubgraphResult};
use crate::gateway::{CallContext, Gateway, Message};
use crate::prompts::{render, Prompts};
use crate::trace::{EventBody, FindingRecorded};

const EXTRACTOR_SYSTEM: &str = "You extract structured security findings from penetration-test logs.";
/// Per-observation cap in the compacted log.
const MAX_OUTPUT_CHARS: usize = 2000;

/// Compact text rendering of an agent's trace slice.
pub fn render_log(events: &[EventBody]) -> String {
    let mut out = Vec::new();
    for e in events {
        match e {
            EventBody::ToolExec(t) => {
                let mut o: String = t.output.chars().take(MAX_OUTPUT_CHARS).collect();
                if o.len() < t.output.len() {
                    o.push_str("\n[...]");
                }
                out.push(format!("[round {}] {} $ {}\n[exit {}]\n{}", t.round, t.tool, t.command, t.exit_code, o));
            }
            EventBody::FlagSubmitted(f) => {
                out.push(format!("[round {}] submit_flag {} -> correct={}", f.round, f.value, f.correct))
            }
            EventBody::EvidenceWritten(w) => out.push(format!("evidence saved: {} ({} bytes)", w.path, w.bytes)),
            EventBody::CriticInterjection(c) => out.push(format!("critic: {}", c.message)),
            _ => {}
        }
    }
    out.join("\n\n")
}

#[derive(Debug, Deserialize)]
struct RawFinding {
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    severity: Value,
    #[serde(default)]
    confidence: Option<f64>,
    #[serde(default)]
    endpoints: Vec<String>,
    #[serde(default)]
    credentials: Option<Vec<String>>,
}

/// Case-insensitive severity; unknown labels degrade to Info with a warning.
pub fn normalize_severity(label: &Value) -> Severity {
    match label.as_str().and_then(Severity::parse_label) {
        Some(s) => s,
        None => {
            tracing::warn!(label = %label, "unknown severity label, using Info");
            Severity::Info
        }
    }
}

/// Parses the extractor's reply: a JSON array, possibly wrapped in prose or
/// an object with a `findings` key.
fn parse_reply(reply: &str) -> Result<Vec<RawFinding>, String> {
    let trimmed = reply.trim();
    let candidate = match (trimmed.find('['), trimmed.rfind(']')) {
        (Some(a), Some(b)) if b > a => &trimmed[a..=b],
        _ => trimmed,
    };
    let v: Value = serde_json::from_str(candidate)
        .or_else(|_| serde_json::from_str(trimmed))
        .map_err(|e| format!("not JSON: {e}"))?;
    let arr = match v {
        Value::Array(a) => a,
        Value::Object(mut o) => match o.remove("findings") {
            Some(Value::Array(a)) => a,
            _ => return Err("expected a JSON array".into()),
        },
        _ => return Err("expected a JSON array".into()),
    };
    arr.into_iter()
        .map(|x| serde_json::from_value::<RawFinding>(x).map_err(|e| format!("bad finding: {e}")))
        .collect()
}

/// Extracts findings for a terminated agent. One call, one repair retry,
/// then an empty list; never fails. Emits `FindingRecorded` per finding.
pub async fn extract_findings(
    agent: &AgentRecord,
    events: &[EventBody],
    evidence: &[String],
    gateway: &Gateway,
    prompts: &Prompts,
) -> Vec<Finding> {
    let log = render_log(events);
    if log.trim().is_empty() {
        return Vec::new();
    }
    let ep = &agent.entrypoint;
    let mut ctx = CallContext::new(Caller::Extractor);
    ctx.agent_id = Some(agent.agent_id.clone());
    ctx.agent_index = Some(agent.team_index);
    ctx.entrypoint = Some(ep.clone());
    let mut messages = vec![
        Message::system(EXTRACTOR_SYSTEM),
        Message::user(render(&prompts.extractor, &[("target", &ep.key()), ("log", &log)])),
    ];
    let mut raw = None;
    for attempt in 0..2 {
        let req = gateway.request(messages.clone(), Vec::new(), ctx.clone());
        let reply = match gateway.complete(&req).await {
            Ok(c) => c.response.message.content,
            Err(e) => {
                tracing::warn!(agent = %agent.agent_id, error = %e, "extractor failed, no findings");
                return Vec::new();
            }
        };
        match parse_reply(&reply) {
            Ok(r) => {
                raw = Some(r);
                break;
            }
            Err(err) if attempt == 0 => {
                messages.push(Message::assistant(reply));
                messages.push(Message::user(render(&prompts.extractor_repair, &[("error", &err)])));
            }
            Err(err) => {
                tracing::warn!(agent = %agent.agent_id, error = %err, "extractor reply unparseable after repair");
            }
        }
    }
    let findings: Vec<Finding> = raw
        .unwrap_or_default()
        .into_iter()
        .filter(|r| !r.title.trim().is_empty())
        .enumerate()
        .map(|(i, r)| Finding {
            finding_id: format!("{}-f{i}", agent.agent_id),
            agent_id: agent.agent_id.clone(),
            entrypoint: ep.clone(),
            title: r.title.trim().to_string(),
            description: r.description,
            severity: normalize_severity(&r.severity),
            confidence: r.confidence.filter(|c| c.is_finite()).unwrap_or(0.5).clamp(0.0, 1.0),
            evidence_refs: evidence.to_vec(),
            endpoints: r.endpoints,
            credentials: r.credentials,
        })
        .collect();
    for f in &findings {
        gateway
            .trace()
            .emit(EventBody::FindingRecorded(FindingRecorded { finding: f.clone() }));
    }
    findings
}

/// One deduplicated corpus entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub entrypoint: EntryPoint,
    pub title: String,
    pub severity: Severity,
    pub description: String,
    pub confidence: f64,
    pub agent_ids: Vec<String>,
    pub finding_ids: Vec<String>,
    pub evidence_refs: Vec<String>,
    pub endpoints: Vec<String>,
}

impl From<&Finding> for CorpusEntry {
    fn from(f: &Finding) -> Self {
        CorpusEntry {
            entrypoint: f.entrypoint.clone(),
            title: f.title.clone(),
            severity: f.severity,
            description: f.description.clone(),
            confidence: f.confidence,
            agent_ids: vec![f.agent_id.clone()],
            finding_ids: vec![f.finding_id.clone()],
            evidence_refs: f.evidence_refs.clone(),
            endpoints: f.endpoints.clone(),
        }
    }
}

fn union(into: &mut Vec<String>, from: &[String]) {
    for x in from {
        if !into.contains(x) {
            into.push(x.clone());
        }
    }
}

/// Merges entries identical in (entrypoint, title, severity), keeping
/// first-seen order. Idempotent.
pub fn dedup(entries: impl IntoIterator<Item = CorpusEntry>) -> Vec<CorpusEntry> {
    let mut out: Vec<CorpusEntry> = Vec::new();
    for e in entries {
        match out
            .iter_mut()
            .find(|o| o.entrypoint == e.entrypoint && o.title == e.title && o.severity == e.severity)
        {
            Some(o) => {
                o.confidence = o.confidence.max(e.confidence);
                union(&mut o.agent_ids, &e.agent_ids);
                union(&mut o.finding_ids, &e.finding_ids);
                union(&mut o.evidence_refs, &e.evidence_refs);
                union(&mut o.endpoints, &e.endpoints);
            }
            None => {
                let mut e = e;
                let mut ids = Vec::new();
                union(&mut ids, &e.agent_ids);
                e.agent_ids = ids;
                out.push(e);
            }
        }
    }
    out
}

/// Corpus over every agent finding in a run.
pub fn aggregate(results: &[SubgraphResult]) -> Vec<CorpusEntry> {
    dedup(
        results
            .iter()
            .flat_map(|r| r.agents.iter())
            .flat_map(|a| a.findings.iter())
            .map(CorpusEntry::from),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwaspCategory {
    pub id: String,
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwaspTable {
    pub categories: Vec<OwaspCategory>,
}

pub const UNMAPPED: &str = "Unmapped";

impl Default for OwaspTable {
    fn default() -> Self {
        serde_json::from_str(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../config/owasp_keywords.json"
        )))
        .expect("shipped keyword table parses")
    }
}

impl OwaspTable {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// First category (in table order) with a keyword in `text`.
    pub fn classify(&self, text: &str) -> Option<&OwaspCategory> {
        let lower = text.to_lowercase();
        self.categories
            .iter()
            .find(|c| c.keywords.iter().any(|k| lower.contains(&k.to_lowercase())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwaspDistribution {
    pub counts: BTreeMap<String, u64>,
    /// Share of each category among mapped findings; empty when none map.
    pub distribution: BTreeMap<String, f64>,
    pub unmapped: u64,
}

/// Maps each finding by its title and description and normalizes over the
/// mapped ones.
pub fn owasp_map<'a>(findings: impl IntoIterator<Item = (&'a str, &'a str)>, table: &OwaspTable) -> OwaspDistribution {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut unmapped = 0;
    for (title, description) in findings {
        match table.classify(&format!("{title}\n{description}")) {
            Some(c) => *counts.entry(c.id.clone()).or_default() += 1,
            None => unmapped += 1,
        }
    }
    let mapped: u64 = counts.values().sum();
    let distribution = if mapped == 0 {
        BTreeMap::new()
    } else {
        counts
            .iter()
            .map(|(k, v)| (k.clone(), *v as f64 / mapped as f64))
            .collect()
    };
    OwaspDistribution {
        counts,
        distribution,
        unmapped,
    }
}

/// Penetration-test report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub entrypoints: Vec<EntryPoint>,
    pub findings: Vec<CorpusEntry>,
    pub owasp_distribution: OwaspDistribution,
}

pub fn build_report(run_id: &str, results: &[SubgraphResult], table: &OwaspTable) -> Report {
    let findings = aggregate(results);
    let owasp_distribution = owasp_map(
        findings.iter().map(|f| (f.title.as_str(), f.description.as_str())),
        table,
    );
    Report {
        run_id: run_id.to_string(),
        entrypoints: results.iter().map(|r| r.entrypoint.clone()).collect(),
        findings,
        owasp_distribution,
    }
}
