//! Reconnaissance: TCP connect scan plus a one-request service fingerprint.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::domain::{truncate_chars, EntryPoint, ServiceKind, MAX_BANNER_CHARS};
use crate::trace::{EntryPointDiscovered, EventBody, TraceSink};

pub const MAX_CONCURRENT_PROBES: usize = 64;
const READ_CAP: usize = 64 * 1024;
/// Quiet period after the first bytes before a response counts as complete.
const IDLE_AFTER_DATA: Duration = Duration::from_millis(250);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    TcpConnect,
    #[default]
    HttpGet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PortSpec {
    Range { start: u16, end: u16 },
    List(Vec<u16>),
}

impl PortSpec {
    pub fn ports(&self) -> Vec<u16> {
        match self {
            PortSpec::Range { start, end } => (*start..=*end).collect(),
            PortSpec::List(v) => v.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        }
    }
}

fn default_timeout_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanTarget {
    pub host: String,
    pub ports: PortSpec,
    #[serde(default = "default_timeout_ms")]
    pub connect_timeout_ms: u64,
    #[serde(default)]
    pub probe: Probe,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScanTargetError {
    #[error("target {0}: port range is empty")]
    EmptyPorts(String),
    #[error("target {0}: port 0 is not scannable")]
    PortZero(String),
    #[error("target {0}: connect timeout must be > 0")]
    ZeroTimeout(String),
}

impl ScanTarget {
    pub fn new(host: impl Into<String>, ports: PortSpec) -> Self {
        ScanTarget {
            host: host.into(),
            ports,
            connect_timeout_ms: default_timeout_ms(),
            probe: Probe::HttpGet,
        }
    }

    pub fn validate(&self) -> Result<(), ScanTargetError> {
        let ports = self.ports.ports();
        if ports.is_empty() {
            return Err(ScanTargetError::EmptyPorts(self.host.clone()));
        }
        if ports.contains(&0) {
            return Err(ScanTargetError::PortZero(self.host.clone()));
        }
        if self.connect_timeout_ms == 0 {
            return Err(ScanTargetError::ZeroTimeout(self.host.clone()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.connect_timeout_ms)
    }
}

async fn resolve(host: &str) -> Option<std::net::IpAddr> {
    match tokio::net::lookup_host((host, 0)).await {
        Ok(mut it) => it.next().map(|a| a.ip()),
        Err(e) => {
            tracing::warn!(host, error = %e, "host unresolvable, skipping");
            None
        }
    }
}

/// Scans every target and returns one entrypoint per accepting port,
/// sorted by (host, port). Emits `EntryPointDiscovered` per result.
pub async fn scan(targets: &[ScanTarget], trace: &TraceSink) -> Vec<EntryPoint> {
    let permits = Arc::new(Semaphore::new(MAX_CONCURRENT_PROBES));
    let mut set = JoinSet::new();
    for t in targets {
        if let Err(e) = t.validate() {
            tracing::warn!(error = %e, "invalid scan target, skipping");
            continue;
        }
        let Some(ip) = resolve(&t.host).await else { continue };
        for port in t.ports.ports() {
            let permits = Arc::clone(&permits);
            let host = t.host.clone();
            let timeout = t.timeout();
            let probe = t.probe;
            set.spawn(async move {
                let _p = permits.acquire_owned().await.expect("semaphore never closed");
                let addr = SocketAddr::new(ip, port);
                let open = matches!(
                    tokio::time::timeout(timeout, TcpStream::connect(addr)).await,
                    Ok(Ok(_))
                );
                if !open {
                    return None;
                }
                let (kind, banner) = match probe {
                    Probe::HttpGet => fingerprint_addr(&host, addr, timeout.max(Duration::from_secs(2))).await,
                    Probe::TcpConnect => (kind_from_port(port), String::new()),
                };
                let ep = EntryPoint::new(host, port, kind);
                Some(if banner.is_empty() { ep } else { ep.with_banner(banner) })
            });
        }
    }
    let mut found = Vec::new();
    while let Some(r) = set.join_next().await {
        if let Ok(Some(ep)) = r {
            found.push(ep);
        }
    }
    found.sort_by(|a, b| (&a.host, a.port).cmp(&(&b.host, b.port)));
    found.dedup_by(|a, b| a.host == b.host && a.port == b.port);
    for ep in &found {
        trace.emit(EventBody::EntryPointDiscovered(EntryPointDiscovered { entrypoint: ep.clone() }));
    }
    found
}

fn kind_from_port(port: u16) -> ServiceKind {
    match port {
        21 => ServiceKind::Ftp,
        22 => ServiceKind::Ssh,
        _ => ServiceKind::TcpUnknown,
    }
}

/// Identifies the service on an open port with one HTTP GET.
pub async fn fingerprint(host: &str, port: u16, timeout: Duration) -> (ServiceKind, String) {
    match resolve(host).await {
        Some(ip) => fingerprint_addr(host, SocketAddr::new(ip, port), timeout).await,
        None => (ServiceKind::TcpUnknown, String::new()),
    }
}

async fn fingerprint_addr(host: &str, addr: SocketAddr, timeout: Duration) -> (ServiceKind, String) {
    match tokio::time::timeout(timeout, exchange(host, addr, timeout)).await {
        Ok(Ok(bytes)) if !bytes.is_empty() => classify(&bytes, addr.port()),
        _ => (ServiceKind::TcpUnknown, String::new()),
    }
}

async fn exchange(host: &str, addr: SocketAddr, timeout: Duration) -> std::io::Result<Vec<u8>> {
    let mut stream = TcpStream::connect(addr).await?;
    let req = format!("GET / HTTP/1.0\r\nHost: {host}:{}\r\nUser-Agent: explorer-recon\r\nConnection: close\r\n\r\n", addr.port());
    // a server that greets first (FTP, SSH) may reset before reading; its
    // greeting is still worth keeping
    let _ = stream.write_all(req.as_bytes()).await;
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let mut wait = timeout;
    loop {
        match tokio::time::timeout(wait, stream.read(&mut chunk)).await {
            Ok(Ok(0)) | Err(_) => break,
            Ok(Ok(n)) => {
                buf.extend_from_slice(&chunk[..n]);
                if buf.len() >= READ_CAP {
                    break;
                }
                wait = IDLE_AFTER_DATA;
            }
            Ok(Err(e)) => {
                if buf.is_empty() {
                    return Err(e);
                }
                break;
            }
        }
    }
    Ok(buf)
}

/// Classifies raw response bytes from the GET probe.
pub fn classify(bytes: &[u8], port: u16) -> (ServiceKind, String) {
    let text = String::from_utf8_lossy(bytes);
    if text.starts_with("HTTP/") {
        let (head, body) = text.split_once("\r\n\r\n").unwrap_or((&text, ""));
        let server = head
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once(':'))
            .find(|(k, _)| k.trim().eq_ignore_ascii_case("server"))
            .map(|(_, v)| v.trim().to_string());
        let title = Regex::new(r"(?is)<title[^>]*>(.*?)</title>")
            .expect("static regex")
            .captures(body)
            .map(|c| c[1].trim().to_string())
            .filter(|t| !t.is_empty());
        let banner = match (server, title) {
            (Some(s), Some(t)) => format!("{s} | {t}"),
            (Some(s), None) => s,
            (None, Some(t)) => t,
            (None, None) => String::new(),
        };
        return (ServiceKind::Http, truncate_chars(&banner, MAX_BANNER_CHARS));
    }
    let banner = truncate_chars(text.trim_end(), MAX_BANNER_CHARS);
    let kind = if text.starts_with("220") {
        ServiceKind::Ftp
    } else if text.starts_with("SSH-") {
        ServiceKind::Ssh
    } else {
        kind_from_port(port)
    };
    (kind, banner)
}
