//! Service manifest: what to serve, where, and with which flag.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use explorer_core::domain::{GroundTruth, GroundTruthEntry};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SimError;

pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_SERVER: &str = "nginx";
pub const FROZEN_CLOCK_ENV: &str = "EXPLORER_FROZEN_CLOCK";

/// Blacklist used by command-injection services unless overridden.
pub const DEFAULT_BLACKLIST: &[&str] = &[
    "cat", "id", "$(", "`", "tac", "nl", "head", "tail", "more", "less", "strings", "xxd", "base64",
    "od", "sed", "awk", "grep", "sh", "python", "perl", "nc", "curl", "wget", "{", "<", ">", "|", "&",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    CmdInjectionBlacklist,
    PathTraversal,
    AuthBypassLogic,
    NoiseStatic,
}

impl ServiceKind {
    pub fn is_vulnerable(self) -> bool {
        !matches!(self, ServiceKind::NoiseStatic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

/// Kind-specific knobs; fields that do not apply to a kind are rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceParams {
    /// Page title.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Command-name keywords blocked by the injection service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blacklist: Option<Vec<String>>,
    /// Extra virtual files (absolute path to content).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub files: BTreeMap<String, String>,
    /// Login accepted by the auth service (grants a non-admin session).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credentials: Option<Credentials>,
    /// Static pages of a noise service (path to HTML body).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pages: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSpec {
    /// 0 binds an ephemeral port.
    pub port: u16,
    pub kind: ServiceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_server")]
    pub server: String,
    #[serde(default)]
    pub params: ServiceParams,
}

fn default_server() -> String {
    DEFAULT_SERVER.into()
}

fn default_host() -> String {
    DEFAULT_HOST.into()
}

impl ServiceSpec {
    pub fn new(port: u16, kind: ServiceKind, flag: Option<&str>) -> Self {
        ServiceSpec {
            port,
            kind,
            flag: flag.map(str::to_string),
            name: None,
            server: default_server(),
            params: ServiceParams::default(),
        }
    }

    pub fn challenge_name(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("service-{index}"))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let flag_ok = self.flag.as_deref().is_some_and(|f| !f.trim().is_empty());
        let what = format!("service on port {}", self.port);
        if self.kind.is_vulnerable() && !flag_ok {
            return Err(SimError::Invalid(format!("{what}: vulnerable kinds require a flag")));
        }
        if !self.kind.is_vulnerable() && self.flag.is_some() {
            return Err(SimError::Invalid(format!("{what}: noise_static must not carry a flag")));
        }
        let p = &self.params;
        let misplaced = match self.kind {
            ServiceKind::CmdInjectionBlacklist => p.credentials.is_some() || !p.pages.is_empty(),
            ServiceKind::PathTraversal => p.blacklist.is_some() || p.credentials.is_some() || !p.pages.is_empty(),
            ServiceKind::AuthBypassLogic => p.blacklist.is_some() || !p.files.is_empty() || !p.pages.is_empty(),
            ServiceKind::NoiseStatic => p.blacklist.is_some() || p.credentials.is_some() || !p.files.is_empty(),
        };
        if misplaced {
            return Err(SimError::Invalid(format!("{what}: params do not apply to {:?}", self.kind)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_host")]
    pub host: String,
    /// Fixed time for `date` rendering; the env var takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_clock: Option<DateTime<Utc>>,
    #[serde(default)]
    pub services: Vec<ServiceSpec>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            host: default_host(),
            frozen_clock: None,
            services: Vec::new(),
        }
    }
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| SimError::Invalid(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.services {
            s.validate()?;
            if s.port != 0 && !seen.insert(s.port) {
                return Err(SimError::Invalid(format!("port {} listed twice", s.port)));
            }
        }
        Ok(())
    }

    /// Clock to render dates with: env var, then manifest, else live.
    pub fn clock(&self) -> Option<DateTime<Utc>> {
        std::env::var(FROZEN_CLOCK_ENV)
            .ok()
            .and_then(|v| DateTime::parse_from_rfc3339(v.trim()).ok())
            .map(|d| d.with_timezone(&Utc))
            .or(self.frozen_clock)
    }

    /// Ground truth for the vulnerable services, given their bound ports
    /// (index-aligned with `services`).
    pub fn ground_truth(&self, ports: &[u16]) -> GroundTruth {
        let entries = self
            .services
            .iter()
            .zip(ports)
            .enumerate()
            .filter_map(|(i, (s, port))| {
                s.flag.as_ref().map(|f| GroundTruthEntry {
                    host: self.host.clone(),
                    port: *port,
                    flag: f.clone(),
                    challenge_name: s.challenge_name(i),
                })
            })
            .collect();
        GroundTruth { entries }
    }

    /// A benchmark-shaped environment: `vulnerable` challenges rotating over
    /// the three vulnerable kinds plus `noise` static sites, on consecutive
    /// ports from `base_port` (0 for ephemeral). Flags derive from `seed`.
    pub fn generate(vulnerable: usize, noise: usize, seed: u64, base_port: u16) -> Manifest {
        const KINDS: [ServiceKind; 3] = [
            ServiceKind::CmdInjectionBlacklist,
            ServiceKind::PathTraversal,
            ServiceKind::AuthBypassLogic,
        ];
        let port = |i: usize| if base_port == 0 { 0 } else { base_port + i as u16 };
        let mut services = Vec::with_capacity(vulnerable + noise);
        for i in 0..vulnerable {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update((i as u64).to_le_bytes());
            let flag = format!("HTB{{{}}}", hex::encode(&h.finalize()[..12]));
            let mut s = ServiceSpec::new(port(i), KINDS[i % 3], Some(&flag));
            s.name = Some(format!("challenge-{i:02}"));
            services.push(s);
        }
        for j in 0..noise {
            let mut s = ServiceSpec::new(port(vulnerable + j), ServiceKind::NoiseStatic, None);
            s.name = Some(format!("noise-{j:02}"));
            s.params.title = Some(NOISE_TITLES[j % NOISE_TITLES.len()].into());
            services.push(s);
        }
        Manifest {
            host: default_host(),
            frozen_clock: None,
            services,
        }
    }
}

pub const NOISE_TITLES: &[&str] = &[
    "Acme Corp Intranet",
    "Team Wiki",
    "Status Dashboard",
    "Photo Gallery",
    "Company Blog",
    "Docs Portal",
];
